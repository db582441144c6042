//! Reference recommenders the transformer is compared against.

use std::collections::HashSet;

use rand::Rng;

use crate::data::PairDataset;
use crate::error::{dim_err, Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::model::Discriminator;
use crate::retrieval::KnnIndex;

fn check_n(n: usize, available: usize, what: &str) -> Result<()> {
    if n > available {
        return Err(Error::Invalid(format!(
            "asked for {n} items but the {what} holds {available}"
        )));
    }
    Ok(())
}

/// `n` distinct index rows drawn uniformly without replacement.
pub fn random_rows<R: Rng + ?Sized>(index: &KnnIndex, n: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_n(n, index.len(), "catalog")?;
    Ok(rand::seq::index::sample(rng, index.len(), n).into_vec())
}

/// `n` distinct catalog ids drawn uniformly without replacement.
pub fn baseline_random<R: Rng + ?Sized>(
    index: &KnnIndex,
    n: usize,
    rng: &mut R,
) -> Result<Vec<String>> {
    let rows = random_rows(index, n, rng)?;
    Ok(rows.into_iter().map(|r| index.ids()[r].clone()).collect())
}

/// Dataset rows ordered by source distance to `query_s` (ties by id), keeping
/// the first row of each distinct item id, truncated to `n`.
pub fn nn_source_rows(ds: &PairDataset, query_s: &[f64], n: usize) -> Result<Vec<usize>> {
    if query_s.len() != ds.d_s() {
        return dim_err(format!(
            "query of dimension {} for d_s = {}",
            query_s.len(),
            ds.d_s()
        ));
    }
    check_n(n, ds.len(), "dataset")?;
    let ids = ds.item_ids();
    let mut order: Vec<(f64, usize)> = ds
        .sources()
        .row_iter()
        .enumerate()
        .map(|(i, s)| (sq_dist(query_s, s), i))
        .collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| ids[a.1].cmp(&ids[b.1])));
    let mut seen = HashSet::new();
    let rows: Vec<usize> = order
        .into_iter()
        .map(|(_, i)| i)
        .filter(|&i| seen.insert(ids[i].as_str()))
        .take(n)
        .collect();
    if rows.len() < n {
        return Err(Error::Invalid(format!(
            "asked for {n} items but the dataset has {} distinct ids",
            rows.len()
        )));
    }
    Ok(rows)
}

/// Ids of the targets paired with the `n` nearest sources.
pub fn baseline_nn_source(ds: &PairDataset, query_s: &[f64], n: usize) -> Result<Vec<String>> {
    let rows = nn_source_rows(ds, query_s, n)?;
    Ok(rows.into_iter().map(|r| ds.item_ids()[r].clone()).collect())
}

/// Discriminator score of `query_s` against every catalog item.
pub fn catalog_scores(
    theta: &Discriminator,
    query_s: &[f64],
    index: &KnnIndex,
) -> Result<Vec<f64>> {
    if query_s.len() != theta.d_s() {
        return dim_err(format!(
            "query of dimension {} for a discriminator with d_s = {}",
            query_s.len(),
            theta.d_s()
        ));
    }
    let m = index.len();
    let mut rows = Vec::with_capacity(m * query_s.len());
    for _ in 0..m {
        rows.extend_from_slice(query_s);
    }
    let sources = Matrix::new(m, query_s.len(), rows)?;
    theta.score_batch(&sources, index.features())
}

/// The `n` catalog rows with the lowest scores, as `(row, score)` ascending
/// by score, ties by id.
pub fn incompatible_rows(
    theta: &Discriminator,
    query_s: &[f64],
    index: &KnnIndex,
    n: usize,
) -> Result<Vec<(usize, f64)>> {
    check_n(n, index.len(), "catalog")?;
    let scores = catalog_scores(theta, query_s, index)?;
    let ids = index.ids();
    let mut order: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| ids[a.0].cmp(&ids[b.0])));
    order.truncate(n);
    Ok(order)
}

/// Ids of the `n` lowest-scoring catalog items, ascending by score.
pub fn baseline_incompatible(
    theta: &Discriminator,
    query_s: &[f64],
    index: &KnnIndex,
    n: usize,
) -> Result<Vec<String>> {
    let rows = incompatible_rows(theta, query_s, index, n)?;
    Ok(rows
        .into_iter()
        .map(|(r, _)| index.ids()[r].clone())
        .collect())
}
