//! Stratifies queries by how crowded their neighbourhood in source space is.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{sq_dist, Matrix};

pub const DEFAULT_K_DENSITY: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityLabel {
    Low,
    Medium,
    High,
}

impl DensityLabel {
    pub const ALL: [DensityLabel; 3] =
        [DensityLabel::Low, DensityLabel::Medium, DensityLabel::High];

    pub fn as_str(self) -> &'static str {
        match self {
            DensityLabel::Low => "low",
            DensityLabel::Medium => "medium",
            DensityLabel::High => "high",
        }
    }
}

impl fmt::Display for DensityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityBin {
    /// Mean distance to the `K` nearest reference sources.
    pub mean_distance: f64,
    pub label: DensityLabel,
}

/// Mean L2 distance from `q` to its `k` nearest rows of `sources`.
pub fn mean_knn_distance(sources: &Matrix, q: &[f64], k: usize) -> f64 {
    let mut d: Vec<f64> = sources.row_iter().map(|s| sq_dist(q, s)).collect();
    d.select_nth_unstable_by(k - 1, f64::total_cmp);
    let mut nearest = d[..k].to_vec();
    nearest.sort_by(f64::total_cmp);
    nearest.iter().map(|v| v.sqrt()).sum::<f64>() / k as f64
}

/// Labels each query by tercile of its mean `k`-NN distance: the third with
/// the smallest distances is high density, the largest third low density.
/// Ties in distance are broken by query order.
pub fn density_bins(sources: &Matrix, queries: &Matrix, k: usize) -> Result<Vec<DensityBin>> {
    if k == 0 || k >= sources.rows() {
        return Err(Error::Invalid(format!(
            "K = {k} must be in 1..{} (the number of reference sources)",
            sources.rows()
        )));
    }
    if queries.cols() != sources.cols() {
        return dim_err(format!(
            "queries have dimension {}, sources {}",
            queries.cols(),
            sources.cols()
        ));
    }
    let n = queries.rows();
    if n < 3 {
        return Err(Error::Invalid(format!(
            "{n} queries cannot fill three density bins"
        )));
    }
    let dist: Vec<f64> = queries
        .row_iter()
        .map(|q| mean_knn_distance(sources, q, k))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let mut bins = vec![
        DensityBin {
            mean_distance: 0.0,
            label: DensityLabel::High,
        };
        n
    ];
    for (rank, &q) in order.iter().enumerate() {
        let label = match rank * 3 / n {
            0 => DensityLabel::High,
            1 => DensityLabel::Medium,
            _ => DensityLabel::Low,
        };
        bins[q] = DensityBin {
            mean_distance: dist[q],
            label,
        };
    }
    Ok(bins)
}
