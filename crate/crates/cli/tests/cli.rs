use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use clap::Parser;
use craft_cli::{resolve_train_config, run, sidecar_path, Cli, Command as Sub};
use craft_core::data::load_dataset;
use craft_core::eval::EvalReport;
use craft_core::model::{load_checkpoint, TrainConfig, Trainer};
use tempfile::TempDir;

fn craft(args: &[&str]) -> anyhow::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("craft").chain(args.iter().copied()))?;
    let mut out = Vec::new();
    run(&cli, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

/// Small dataset and a briefly trained small model.
fn fixture(dir: &TempDir) -> (String, String) {
    let ds = p(dir, "ds.craftds");
    let ck = p(dir, "ck.craftck");
    craft(&[
        "gen-data",
        "--preset",
        "two-cluster-2d",
        "--n",
        "600",
        "--seed",
        "1",
        "--out",
        &ds,
    ])
    .unwrap();
    craft(&[
        "train",
        "--dataset",
        &ds,
        "--epochs",
        "2",
        "--hidden",
        "16,16",
        "--d-z",
        "4",
        "--batch-size",
        "32",
        "--seed",
        "3",
        "--log-every",
        "0",
        "--out",
        &ck,
    ])
    .unwrap();
    (ds, ck)
}

#[test]
fn gen_data_is_deterministic_and_loads_back() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.craftds"), p(&dir, "b.craftds"));
    for out in [&a, &b] {
        let msg = craft(&[
            "gen-data",
            "--preset",
            "two-cluster-2d",
            "--n",
            "5000",
            "--seed",
            "7",
            "--out",
            out,
        ])
        .unwrap();
        assert!(
            msg.contains("5000 pairs") && msg.contains("seed 7"),
            "{msg}"
        );
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let ds = load_dataset(&a).unwrap();
    assert_eq!((ds.len(), ds.d_s(), ds.d_t()), (5000, 2, 2));
    assert_eq!(ds.meta.seed, Some(7));
    let recorded = craft_cli::recorded_spec(&ds).unwrap();
    assert_eq!(
        recorded,
        craft_core::data::preset("two-cluster-2d").unwrap()
    );
}

#[test]
fn gen_data_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let out = p(&dir, "x.craftds");
    assert!(craft(&[
        "gen-data",
        "--preset",
        "two-cluster-2d",
        "--n",
        "0",
        "--out",
        &out
    ])
    .is_err());
    assert!(craft(&["gen-data", "--preset", "nope", "--n", "5", "--out", &out]).is_err());
    assert!(craft(&["gen-data", "--n", "5", "--out", &out]).is_err());
    let bad = p(&dir, "bad.json");
    fs::write(&bad, "{\"d_s\": 2}").unwrap();
    assert!(craft(&["gen-data", "--spec", &bad, "--n", "5", "--out", &out]).is_err());
    assert!(!Path::new(&out).exists());
}

#[test]
fn default_flags_echo_documented_hyperparameters() {
    let dir = TempDir::new().unwrap();
    let ds = p(&dir, "ds.craftds");
    let ck = p(&dir, "ck.craftck");
    craft(&[
        "gen-data",
        "--preset",
        "two-cluster-2d",
        "--n",
        "200",
        "--out",
        &ds,
    ])
    .unwrap();
    craft(&["train", "--dataset", &ds, "--epochs", "0", "--out", &ck]).unwrap();
    let (model, config) = load_checkpoint(&ck).unwrap();
    assert_eq!(config.learning_rate, 0.0002);
    assert_eq!(config.leaky_alpha, 0.2);
    assert_eq!(config.d_z, 128);
    // zero epochs: the initialization drawn from the seed
    let init = Trainer::new(2, 2, config).unwrap().into_model();
    assert_eq!(model, init);
    let curve = fs::read_to_string(p(&dir, "ck.loss.csv")).unwrap();
    assert_eq!(curve, "step,d_loss,t_loss\n");
}

#[test]
fn training_twice_gives_identical_checkpoints_and_curves() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let (_, ck_a) = fixture(&a);
    let (_, ck_b) = fixture(&b);
    assert_eq!(fs::read(&ck_a).unwrap(), fs::read(&ck_b).unwrap());
    let curve_a = fs::read_to_string(p(&a, "ck.loss.csv")).unwrap();
    assert_eq!(curve_a, fs::read_to_string(p(&b, "ck.loss.csv")).unwrap());
    // 600 / 32 = 18 full batches per epoch
    assert_eq!(curve_a.lines().count(), 1 + 2 * 18);
    let meta = fs::read_to_string(sidecar_path(&PathBuf::from(p(&a, "ck.loss.csv")))).unwrap();
    let meta: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(meta["resolved"]["train_config"]["batch_size"], 32);
}

#[test]
fn config_file_and_flags_layer_over_defaults() {
    let dir = TempDir::new().unwrap();
    let path = p(&dir, "cfg.json");
    fs::write(&path, r#"{"epochs": 7, "d_z": 16, "learning_rate": 0.001}"#).unwrap();
    let cli = Cli::try_parse_from([
        "craft",
        "train",
        "--dataset",
        "x",
        "--config",
        &path,
        "--d-z",
        "8",
        "--non-saturating",
    ])
    .unwrap();
    let Sub::Train(args) = cli.command else {
        panic!("parsed the wrong subcommand")
    };
    let c = resolve_train_config(&args.flags).unwrap();
    let expected = TrainConfig {
        epochs: 7,
        d_z: 8,
        learning_rate: 0.001,
        non_saturating: true,
        ..TrainConfig::default()
    };
    assert_eq!(c, expected);
}

#[test]
fn recommend_outputs() {
    let dir = TempDir::new().unwrap();
    let (ds, ck) = fixture(&dir);
    let one = craft(&[
        "recommend",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--query-row",
        "4",
        "--n-samples",
        "1",
        "--k",
        "1",
    ])
    .unwrap();
    assert_eq!(one.lines().count(), 1);

    let args = [
        "recommend",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--query=-2.5,0.3",
        "--seed",
        "5",
    ];
    let a = craft(&args).unwrap();
    assert_eq!(a, craft(&args).unwrap());
    let n = a.lines().count();
    assert!((1..=17).contains(&n));
    let dists: Vec<f64> = a
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(dists.windows(2).all(|w| w[0] <= w[1]));

    let csv = p(&dir, "rec.csv");
    craft(&[
        "recommend",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--query-row",
        "0",
        "--out",
        &csv,
    ])
    .unwrap();
    assert!(fs::read_to_string(&csv)
        .unwrap()
        .starts_with("rank,id,distance\n"));
    assert!(sidecar_path(Path::new(&csv)).exists());
}

#[test]
fn recommend_default_samples() {
    let cli = Cli::try_parse_from([
        "craft",
        "recommend",
        "--checkpoint",
        "c",
        "--index",
        "i",
        "--query",
        "1,2",
    ])
    .unwrap();
    let Sub::Recommend(args) = cli.command else {
        panic!("parsed the wrong subcommand")
    };
    assert_eq!((args.n_samples, args.k), (17, 1));
}

#[test]
fn recommend_rejects_mismatched_dimensions() {
    let dir = TempDir::new().unwrap();
    let (ds, ck) = fixture(&dir);
    let err = craft(&[
        "recommend",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--query",
        "1,2,3",
    ])
    .unwrap_err();
    assert!(err.to_string().contains("3 features"), "{err}");

    let other = p(&dir, "eight.craftds");
    let idx = p(&dir, "eight.craftix");
    craft(&[
        "gen-data",
        "--preset",
        "five-cluster-8d",
        "--n",
        "50",
        "--out",
        &other,
    ])
    .unwrap();
    craft(&["build-index", "--dataset", &other, "--out", &idx]).unwrap();
    assert!(craft(&[
        "recommend",
        "--checkpoint",
        &ck,
        "--index",
        &idx,
        "--query",
        "1,2"
    ])
    .is_err());
}

#[test]
fn evaluate_reports_twelve_cells_reproducibly() {
    let dir = TempDir::new().unwrap();
    let (ds, ck) = fixture(&dir);
    let mut reports = Vec::new();
    for name in ["r1.json", "r2.json"] {
        let out = p(&dir, name);
        craft(&[
            "evaluate",
            "--checkpoint",
            &ck,
            "--dataset",
            &ds,
            "--preset",
            "two-cluster-2d",
            "--n-queries",
            "30",
            "--n-mean-samples",
            "10",
            "--format",
            "json",
            "--out",
            &out,
        ])
        .unwrap();
        reports.push(fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let report: EvalReport = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(report.cells.len(), 12);
    assert_eq!(report.settings.k_density, 25);
    assert_eq!(report.metric, "oracle_distance");
    assert!(report.conditional_mean_error.is_some());
    assert_eq!(report.config["subcommand"], "evaluate");

    let csv = p(&dir, "r.csv");
    craft(&[
        "evaluate",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--n-queries",
        "30",
        "--out",
        &csv,
    ])
    .unwrap();
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "algorithm,bin,n_queries,value"
    );
    assert_eq!(text.lines().count(), 13);
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sidecar_path(Path::new(&csv))).unwrap()).unwrap();
    assert_eq!(meta["metric"], "paired_target_distance");
}

#[test]
fn evaluate_rejects_a_different_generator() {
    let dir = TempDir::new().unwrap();
    let (ds, ck) = fixture(&dir);
    let out = p(&dir, "r.csv");
    let err = craft(&[
        "evaluate",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--preset",
        "density-gradient",
        "--out",
        &out,
    ])
    .unwrap_err();
    assert!(err.to_string().contains("does not match"), "{err}");
}

#[test]
fn score_map_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let (ds, ck) = fixture(&dir);
    let csv = p(&dir, "map.csv");
    craft(&[
        "score-map",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--query-row",
        "2",
        "--out",
        &csv,
    ])
    .unwrap();
    let mut reader = csv::Reader::from_path(&csv).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["id", "x", "y", "score"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 600);
    for r in &rows {
        let score: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&score));
    }

    let json = p(&dir, "map.json");
    craft(&[
        "score-map",
        "--checkpoint",
        &ck,
        "--dataset",
        &ds,
        "--query-row",
        "2",
        "--format",
        "json",
        "--out",
        &json,
    ])
    .unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&fs::read(&json).unwrap()).unwrap();
    assert_eq!(doc["records"].as_array().unwrap().len(), 600);
    assert_eq!(
        doc["records"][5]["score"].as_f64().unwrap(),
        rows[5][3].parse::<f64>().unwrap()
    );
}

#[test]
fn import_csv_with_pca() {
    let dir = TempDir::new().unwrap();
    let input = p(&dir, "pairs.csv");
    let mut text = String::from("id,s1,s2,s3,t1,t2\n");
    for i in 0..40 {
        let x = i as f64;
        text.push_str(&format!(
            "item{i},{},{},{},{},{}\n",
            x,
            2.0 * x,
            (x * 0.3).sin(),
            -x,
            x * x / 40.0
        ));
    }
    fs::write(&input, text).unwrap();
    let out = p(&dir, "imp.craftds");
    craft(&[
        "import-csv",
        "--input",
        &input,
        "--d-s",
        "3",
        "--pca-source",
        "2",
        "--out",
        &out,
    ])
    .unwrap();
    let ds = load_dataset(&out).unwrap();
    assert_eq!((ds.len(), ds.d_s(), ds.d_t()), (40, 2, 2));
    assert_eq!(ds.item_ids()[7], "item7");
    let prov: serde_json::Value = serde_json::from_str(&ds.meta.provenance).unwrap();
    assert_eq!(prov["resolved"]["source_pca"]["components"], 2);
    assert!(prov["resolved"].get("target_pca").is_none());
}

#[test]
fn binary_uses_out_dir_env_and_reports_errors_on_one_line() {
    let dir = TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_craft");
    let ok = Command::new(bin)
        .args(["gen-data", "--preset", "density-gradient", "--n", "30"])
        .env("CRAFT_OUT_DIR", dir.path().join("nested"))
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(dir.path().join("nested/dataset.craftds").exists());

    let bad = Command::new(bin)
        .args(["build-index", "--dataset", "/nonexistent/ds.craftds"])
        .env("CRAFT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let stderr = String::from_utf8(bad.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.starts_with("error: "));
    assert!(bad.stdout.is_empty());
}
