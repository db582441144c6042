//! Subcommands of the `craft` binary, callable in-process.

pub mod args;
mod commands;

use std::io::Write;

use anyhow::Result;

pub use args::{Cli, Command};
pub use commands::{
    cmd_build_index, cmd_evaluate, cmd_gen_data, cmd_import_csv, cmd_recommend, cmd_score_map,
    cmd_train, recorded_spec, resolve_train_config, sidecar_path, LOSS_CURVE_HEADER, OUT_DIR_ENV,
};

/// Runs one parsed command line, writing its report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(a, out).map(drop),
        Command::ImportCsv(a) => cmd_import_csv(a, out).map(drop),
        Command::BuildIndex(a) => cmd_build_index(a, out).map(drop),
        Command::Train(a) => cmd_train(a, out).map(drop),
        Command::Recommend(a) => cmd_recommend(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out).map(drop),
        Command::ScoreMap(a) => cmd_score_map(a, out).map(drop),
    }
}
