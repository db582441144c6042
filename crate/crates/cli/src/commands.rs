use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use craft_core::data::{
    import_csv, load_dataset, pca_fit, pca_fit_whitened, preset, save_dataset, PairDataset,
    PcaProjection, SyntheticSpec,
};
use craft_core::eval::{evaluate, score_map, write_score_map_csv, EvalSettings};
use craft_core::model::{load_checkpoint, save_checkpoint, train_with, CraftModel, TrainConfig};
use craft_core::retrieval::{load_index, recommend, save_index, KnnIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{
    BuildIndexArgs, EvaluateArgs, Format, GenDataArgs, ImportCsvArgs, QueryArgs, RecommendArgs,
    ScoreMapArgs, SpecSource, TrainArgs, TrainFlags,
};

/// Environment variable naming the directory for outputs without an
/// explicit path. Unset means the working directory.
pub const OUT_DIR_ENV: &str = "CRAFT_OUT_DIR";

pub const LOSS_CURVE_HEADER: [&str; 3] = ["step", "d_loss", "t_loss"];

fn output_path(explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("."))
            .join(default_name),
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

/// `<path>.meta.json`, the configuration record next to a CSV output.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, config: &Value) -> Result<()> {
    let side = sidecar_path(path);
    fs::write(&side, pretty(config)).with_context(|| format!("writing {}", side.display()))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// The resolved configuration of one run. Output paths are left out so that
/// identical runs writing to different places produce identical artifacts.
fn echo(subcommand: &str, args: &impl Serialize, resolved: Value) -> Value {
    json!({
        "subcommand": subcommand,
        "args": serde_json::to_value(args).expect("arguments serialize"),
        "resolved": resolved,
    })
}

fn load_spec(source: &SpecSource) -> Result<Option<SyntheticSpec>> {
    match (&source.preset, &source.spec) {
        (Some(name), _) => Ok(Some(preset(name)?)),
        (None, Some(path)) => Ok(Some(
            SyntheticSpec::load(path).with_context(|| format!("loading {}", path.display()))?,
        )),
        (None, None) => Ok(None),
    }
}

/// The generator recorded in a dataset's provenance, if any.
pub fn recorded_spec(ds: &PairDataset) -> Option<SyntheticSpec> {
    let v: Value = serde_json::from_str(&ds.meta.provenance).ok()?;
    let spec = v.pointer("/resolved/spec").cloned().unwrap_or(v);
    serde_json::from_value(spec).ok()
}

fn read_dataset_file(path: &Path) -> Result<PairDataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn read_checkpoint_file(path: &Path) -> Result<(CraftModel, TrainConfig)> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn cmd_gen_data(args: &GenDataArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let spec = load_spec(&args.source)?.ok_or_else(|| anyhow!("pass --preset or --spec"))?;
    if args.n == 0 {
        bail!("--n must be positive");
    }
    let mut ds = spec.generate_seeded(args.n, args.seed)?;
    ds.meta.provenance = echo("gen-data", args, json!({ "spec": spec })).to_string();
    let path = output_path(&args.out, "dataset.craftds");
    create_parent(&path)?;
    save_dataset(&ds, &path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(
        out,
        "wrote {} pairs (d_s = {}, d_t = {}, seed {}) to {}",
        ds.len(),
        ds.d_s(),
        ds.d_t(),
        args.seed,
        path.display()
    )?;
    Ok(path)
}

fn reduce(x: &craft_core::Matrix, k: usize, whiten: bool) -> Result<PcaProjection> {
    Ok(if whiten {
        pca_fit_whitened(x, k)?
    } else {
        pca_fit(x, k)?
    })
}

fn projection_summary(p: &PcaProjection) -> Value {
    json!({
        "input_dim": p.input_dim(),
        "components": p.output_dim(),
        "explained_variance": p.explained_variance,
        "whiten": p.whiten,
    })
}

pub fn cmd_import_csv(args: &ImportCsvArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let ds = import_csv(&args.input, args.d_s)
        .with_context(|| format!("importing {}", args.input.display()))?;
    let mut resolved = json!({});
    let mut sources = ds.sources().clone();
    let mut targets = ds.targets().clone();
    if let Some(k) = args.pca_source {
        let p = reduce(&sources, k, args.whiten).context("source PCA")?;
        sources = p.transform(&sources)?;
        resolved["source_pca"] = projection_summary(&p);
    }
    if let Some(k) = args.pca_target {
        let p = reduce(&targets, k, args.whiten).context("target PCA")?;
        targets = p.transform(&targets)?;
        resolved["target_pca"] = projection_summary(&p);
    }
    let mut meta = ds.meta.clone();
    if let Some(name) = &args.name {
        meta.name = name.clone();
    }
    meta.provenance = echo("import-csv", args, resolved).to_string();
    let ds = PairDataset::new(sources, targets, ds.item_ids().to_vec(), meta)?;
    let path = output_path(&args.out, "dataset.craftds");
    create_parent(&path)?;
    save_dataset(&ds, &path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(
        out,
        "imported {} pairs (d_s = {}, d_t = {}) to {}",
        ds.len(),
        ds.d_s(),
        ds.d_t(),
        path.display()
    )?;
    Ok(path)
}

pub fn cmd_build_index(args: &BuildIndexArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let ds = read_dataset_file(&args.dataset)?;
    let resolved = json!({ "dataset_name": ds.meta.name, "items": ds.len(), "dim": ds.d_t() });
    let index = KnnIndex::from_dataset(&ds)?
        .with_provenance(echo("build-index", args, resolved).to_string());
    let path = output_path(&args.out, "index.craftix");
    create_parent(&path)?;
    save_index(&index, &path).with_context(|| format!("writing {}", path.display()))?;
    writeln!(
        out,
        "indexed {} items of dimension {} to {}",
        index.len(),
        index.dim(),
        path.display()
    )?;
    Ok(path)
}

/// Defaults, overridden by the `--config` file, overridden by flags.
pub fn resolve_train_config(flags: &TrainFlags) -> Result<TrainConfig> {
    let mut c = match &flags.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($($field:ident),*) => {
            $(if let Some(v) = &flags.$field {
                c.$field = v.clone();
            })*
        };
    }
    set!(
        learning_rate,
        batch_size,
        epochs,
        d_z,
        leaky_alpha,
        real_label,
        seed,
        d_steps_per_t_step,
        hidden
    );
    c.non_saturating |= flags.non_saturating;
    c.discriminator_batch_stats_in_t_step |= flags.discriminator_batch_stats_in_t_step;
    c.validate()?;
    Ok(c)
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let ds = read_dataset_file(&args.dataset)?;
    let config = resolve_train_config(&args.flags)?;
    let path = output_path(&args.out, "checkpoint.craftck");
    let curve_path = args
        .loss_curve
        .clone()
        .unwrap_or_else(|| path.with_extension("loss.csv"));
    create_parent(&path)?;
    create_parent(&curve_path)?;

    let epochs = config.epochs;
    let mut log_err = Ok(());
    let outcome = train_with(&ds, &config, |epoch, losses| {
        let every = args.log_every;
        if every == 0 || ((epoch + 1) % every != 0 && epoch + 1 != epochs) || losses.is_empty() {
            return;
        }
        let n = losses.len() as f64;
        let d = losses.iter().map(|l| l.d_loss).sum::<f64>() / n;
        let t = losses.iter().map(|l| l.t_loss).sum::<f64>() / n;
        if log_err.is_ok() {
            log_err = writeln!(
                out,
                "epoch {}/{epochs}: d_loss {d:.4} t_loss {t:.4}",
                epoch + 1
            );
        }
    })
    .context("training failed")?;
    log_err?;

    save_checkpoint(&outcome.model, &config, &path)
        .with_context(|| format!("writing {}", path.display()))?;
    let mut w = csv::Writer::from_path(&curve_path)
        .with_context(|| format!("writing {}", curve_path.display()))?;
    w.write_record(LOSS_CURVE_HEADER)?;
    for l in &outcome.history {
        w.serialize((l.step, l.d_loss, l.t_loss))?;
    }
    w.flush()?;
    write_sidecar(
        &curve_path,
        &echo("train", args, json!({ "train_config": config })),
    )?;
    writeln!(
        out,
        "trained {} steps over {} epochs; checkpoint {}, loss curve {}",
        outcome.history.len(),
        epochs,
        path.display(),
        curve_path.display()
    )?;
    Ok(path)
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| anyhow!("{t:?} is not a number"))
        })
        .collect()
}

fn query_vector(q: &QueryArgs, dataset: Option<&PairDataset>) -> Result<Vec<f64>> {
    let v = if let Some(v) = &q.query {
        v.clone()
    } else if let Some(path) = &q.query_file {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        parse_vector(&text).with_context(|| format!("parsing {}", path.display()))?
    } else if let Some(row) = q.query_row {
        let ds = dataset.ok_or_else(|| anyhow!("--query-row needs --dataset"))?;
        if row >= ds.len() {
            bail!("--query-row {row} is out of range for {} pairs", ds.len());
        }
        ds.sources().row(row).to_vec()
    } else {
        bail!("pass --query, --query-file or --query-row");
    };
    if v.iter().any(|x| !x.is_finite()) {
        bail!("query contains non-finite values");
    }
    Ok(v)
}

/// Catalog from `--index`, else from the dataset's targets.
fn catalog(index: &Option<PathBuf>, dataset: Option<&PairDataset>) -> Result<KnnIndex> {
    match (index, dataset) {
        (Some(path), _) => {
            load_index(path).with_context(|| format!("loading index {}", path.display()))
        }
        (None, Some(ds)) => Ok(KnnIndex::from_dataset(ds)?),
        (None, None) => bail!("pass --index or --dataset"),
    }
}

fn check_dims(model: &CraftModel, index: &KnnIndex, query: &[f64]) -> Result<()> {
    if model.d_t() != index.dim() {
        bail!(
            "checkpoint produces {}-d targets but the catalog holds {}-d features",
            model.d_t(),
            index.dim()
        );
    }
    if query.len() != model.d_s() {
        bail!(
            "query has {} features, checkpoint expects {}",
            query.len(),
            model.d_s()
        );
    }
    Ok(())
}

pub fn cmd_recommend(args: &RecommendArgs, out: &mut dyn Write) -> Result<()> {
    let (model, _) = read_checkpoint_file(&args.checkpoint)?;
    let ds = args.dataset.as_deref().map(read_dataset_file).transpose()?;
    let index = catalog(&args.index, ds.as_ref())?;
    let query = query_vector(&args.query, ds.as_ref())?;
    check_dims(&model, &index, &query)?;
    if args.n_samples == 0 || args.k == 0 {
        bail!("--n-samples and --k must be positive");
    }
    if args.k > index.len() {
        bail!("--k {} exceeds the {} catalog items", args.k, index.len());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let recs = recommend(
        &model.transformer,
        &index,
        &query,
        args.n_samples,
        args.k,
        &mut rng,
    )?;
    for r in &recs {
        writeln!(out, "{}\t{}", r.id, r.distance)?;
    }
    if let Some(path) = &args.out {
        create_parent(path)?;
        let mut w =
            csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["rank", "id", "distance"])?;
        for (rank, r) in recs.iter().enumerate() {
            w.serialize((rank + 1, &r.id, r.distance))?;
        }
        w.flush()?;
        write_sidecar(path, &echo("recommend", args, json!({ "query": query })))?;
    }
    Ok(())
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let (model, _) = read_checkpoint_file(&args.checkpoint)?;
    let ds = read_dataset_file(&args.dataset)?;
    let spec = load_spec(&args.oracle)?;
    match (&spec, recorded_spec(&ds)) {
        (Some(given), Some(recorded)) if *given != recorded => bail!(
            "generator {:?} does not match {:?}, recorded in the dataset",
            given.name,
            recorded.name
        ),
        (None, _) => eprintln!(
            "warning: no generator given (--preset or --spec); reporting oracle-free metrics only"
        ),
        _ => {}
    }
    let settings = EvalSettings {
        k_density: args.k_density,
        n_queries: args.n_queries,
        n_recs: args.n_recs,
        n_mean_samples: args.n_mean_samples,
        seed: args.seed,
    };
    let config = echo("evaluate", args, json!({ "spec": spec }));
    let report = evaluate(&model, &ds, spec.as_ref(), &settings, config)?;

    let path = output_path(&args.out, &format!("report.{}", args.format.extension()));
    create_parent(&path)?;
    match args.format {
        Format::Json => {
            let mut text = report.to_json();
            text.push('\n');
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        Format::Csv => {
            let f =
                fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            report.write_csv(f)?;
            write_sidecar(
                &path,
                &json!({
                    "config": report.config,
                    "settings": report.settings,
                    "metric": report.metric,
                    "conditional_mean_error": report.conditional_mean_error,
                }),
            )?;
        }
    }
    writeln!(
        out,
        "{} by density bin ({} queries):",
        report.metric, settings.n_queries
    )?;
    for c in &report.cells {
        writeln!(
            out,
            "  {:<12} {:<6} n = {:<4} {:.4}",
            c.algorithm.as_str(),
            c.bin.as_str(),
            c.n_queries,
            c.value
        )?;
    }
    if let Some(e) = report.conditional_mean_error {
        writeln!(out, "conditional-mean error: {e:.4}")?;
    }
    writeln!(out, "report written to {}", path.display())?;
    Ok(path)
}

pub fn cmd_score_map(args: &ScoreMapArgs, out: &mut dyn Write) -> Result<PathBuf> {
    let (model, _) = read_checkpoint_file(&args.checkpoint)?;
    let ds = args.dataset.as_deref().map(read_dataset_file).transpose()?;
    let index = catalog(&args.index, ds.as_ref())?;
    let query = query_vector(&args.query, ds.as_ref())?;
    check_dims(&model, &index, &query)?;
    let projection = pca_fit(index.features(), index.dim().min(2))?;
    let records = score_map(&model.discriminator, &query, &index, &projection)?;
    let config = echo("score-map", args, json!({ "query": query }));

    let path = output_path(&args.out, &format!("score_map.{}", args.format.extension()));
    create_parent(&path)?;
    match args.format {
        Format::Csv => {
            let f =
                fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_score_map_csv(&records, f)?;
            write_sidecar(&path, &config)?;
        }
        Format::Json => {
            let doc = json!({ "config": config, "records": records });
            fs::write(&path, pretty(&doc))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    writeln!(out, "scored {} items to {}", records.len(), path.display())?;
    Ok(path)
}
