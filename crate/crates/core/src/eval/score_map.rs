//! Discriminator scores of one query against a whole catalog, laid out on a
//! 2-D projection of the catalog for plotting.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::baselines::catalog_scores;
use crate::data::PcaProjection;
use crate::error::{dim_err, Result};
use crate::model::Discriminator;
use crate::retrieval::KnnIndex;

pub const SCORE_MAP_HEADER: [&str; 4] = ["id", "x", "y", "score"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// One record per catalog item, in catalog order. A one-component
/// projection (one-dimensional targets) places every item at `y = 0`.
pub fn score_map(
    theta: &Discriminator,
    query_s: &[f64],
    catalog: &KnnIndex,
    projection: &PcaProjection,
) -> Result<Vec<ScoreRecord>> {
    if projection.input_dim() != catalog.dim() {
        return dim_err(format!(
            "projection expects {}-d inputs, catalog holds {}-d features",
            projection.input_dim(),
            catalog.dim()
        ));
    }
    if !(1..=2).contains(&projection.output_dim()) {
        return dim_err(format!(
            "score maps need a 2-D projection, got {} components",
            projection.output_dim()
        ));
    }
    let scores = catalog_scores(theta, query_s, catalog)?;
    let coords = projection.transform(catalog.features())?;
    Ok(catalog
        .ids()
        .iter()
        .zip(coords.row_iter())
        .zip(scores)
        .map(|((id, xy), score)| ScoreRecord {
            id: id.clone(),
            x: xy[0],
            y: xy.get(1).copied().unwrap_or(0.0),
            score,
        })
        .collect())
}

pub fn write_score_map_csv<W: Write>(records: &[ScoreRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SCORE_MAP_HEADER)?;
    for r in records {
        w.serialize((&r.id, r.x, r.y, r.score))?;
    }
    w.flush()?;
    Ok(())
}
