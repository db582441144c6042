//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Conditional adversarial feature transformer for complementary
/// recommendation.
#[derive(Debug, Parser)]
#[command(name = "craft", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a synthetic pair dataset from a preset or a spec file.
    GenData(GenDataArgs),
    /// Import feature pairs from CSV, optionally reduced with PCA.
    ImportCsv(ImportCsvArgs),
    /// Build a nearest-neighbour index over a dataset's targets.
    BuildIndex(BuildIndexArgs),
    /// Train the transformer and discriminator on a pair dataset.
    Train(TrainArgs),
    /// Recommend catalog items for one query.
    Recommend(RecommendArgs),
    /// Compare the transformer against baselines per density bin.
    Evaluate(EvaluateArgs),
    /// Export discriminator scores of one query over a catalog.
    ScoreMap(ScoreMapArgs),
}

/// Where a synthetic distribution comes from.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SpecSource {
    /// Built-in distribution name.
    #[arg(long, conflicts_with = "spec")]
    pub preset: Option<String>,
    /// JSON file describing a mixture.
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub source: SpecSource,
    /// Number of pairs.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file [default: $CRAFT_OUT_DIR/dataset.craftds].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportCsvArgs {
    /// CSV with rows `id, s_1..s_ds, t_1..t_dt`.
    #[arg(long)]
    pub input: PathBuf,
    /// Number of source columns.
    #[arg(long)]
    pub d_s: usize,
    /// Reduce sources to this many principal components.
    #[arg(long)]
    pub pca_source: Option<usize>,
    /// Reduce targets to this many principal components.
    #[arg(long)]
    pub pca_target: Option<usize>,
    /// Scale principal components to unit variance.
    #[arg(long)]
    pub whiten: bool,
    /// Dataset name [default: input file stem].
    #[arg(long)]
    pub name: Option<String>,
    /// Output file [default: $CRAFT_OUT_DIR/dataset.craftds].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BuildIndexArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output file [default: $CRAFT_OUT_DIR/index.craftix].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Training flags; unset flags fall back to `--config`, then to defaults.
#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct TrainFlags {
    /// JSON file with training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub d_z: Option<usize>,
    #[arg(long)]
    pub leaky_alpha: Option<f64>,
    #[arg(long)]
    pub real_label: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d_steps_per_t_step: Option<usize>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Use `-log D` as the transformer loss.
    #[arg(long)]
    pub non_saturating: bool,
    /// Score synthetic pairs in transformer updates with the
    /// discriminator's batch statistics.
    #[arg(long)]
    pub discriminator_batch_stats_in_t_step: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub flags: TrainFlags,
    /// Print losses every this many epochs; 0 is silent.
    #[arg(long, default_value_t = 10)]
    #[serde(skip)]
    pub log_every: usize,
    /// Checkpoint file [default: $CRAFT_OUT_DIR/checkpoint.craftck].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
    /// Loss-curve CSV [default: <out>.loss.csv].
    #[arg(long)]
    #[serde(skip)]
    pub loss_curve: Option<PathBuf>,
}

/// One query source vector.
#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
pub struct QueryArgs {
    /// Comma-separated source features.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub query: Option<Vec<f64>>,
    /// File holding the source features, separated by commas or whitespace.
    #[arg(long)]
    pub query_file: Option<PathBuf>,
    /// Use the source of this dataset row.
    #[arg(long)]
    pub query_row: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(id = "catalog", required = true, multiple = true, args = ["index", "dataset"])]
pub struct RecommendArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Catalog index; defaults to the targets of `--dataset`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Dataset supplying the catalog (without `--index`) and `--query-row`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub query: QueryArgs,
    /// Noise samples to synthesize.
    #[arg(long, default_value_t = 17)]
    pub n_samples: usize,
    /// Catalog neighbours per synthesized feature.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the ranking to this CSV.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    /// Generator of the dataset, for oracle metrics.
    #[command(flatten)]
    pub oracle: SpecSource,
    /// Neighbours for the density statistic.
    #[arg(long = "k", default_value_t = 25)]
    pub k_density: usize,
    #[arg(long, default_value_t = 300)]
    pub n_queries: usize,
    /// Recommendations per query and algorithm.
    #[arg(long, default_value_t = 17)]
    pub n_recs: usize,
    /// Noise draws per query for the conditional-mean error.
    #[arg(long, default_value_t = 100)]
    pub n_mean_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Report file [default: $CRAFT_OUT_DIR/report.<format>].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(id = "catalog", required = true, multiple = true, args = ["index", "dataset"])]
pub struct ScoreMapArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Catalog index; defaults to the targets of `--dataset`.
    #[arg(long)]
    pub index: Option<PathBuf>,
    /// Dataset supplying the catalog (without `--index`) and `--query-row`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[command(flatten)]
    pub query: QueryArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output file [default: $CRAFT_OUT_DIR/score_map.<format>].
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}
