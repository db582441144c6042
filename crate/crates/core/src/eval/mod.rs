//! Baseline recommenders, density stratification, oracle-based quality
//! metrics and discriminator score maps.

mod baselines;
mod density;
mod metrics;
mod report;
mod score_map;

pub use baselines::{
    baseline_incompatible, baseline_nn_source, baseline_random, catalog_scores, incompatible_rows,
    nn_source_rows, random_rows,
};
pub use density::{density_bins, mean_knn_distance, DensityBin, DensityLabel, DEFAULT_K_DENSITY};
pub use metrics::{
    conditional_mean_error, conditional_mean_error_at, conditional_mean_errors, oracle_distance,
    sample_outputs, spread,
};
pub use report::{evaluate, Algorithm, EvalReport, EvalSettings, ReportCell, REPORT_CSV_HEADER};
pub use score_map::{score_map, write_score_map_csv, ScoreRecord, SCORE_MAP_HEADER};
