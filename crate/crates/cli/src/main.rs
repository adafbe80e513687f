//! Command-line pipeline for invariant signatures of planar curves:
//! dataset generation, model training, signature computation, comparison,
//! the axiomatic baseline, and plot emission.

mod plot;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use curvesig::axiomatic::axiomatic_euclidean_signature;
use curvesig::dataset::{
    build_synthetic_dataset, extract_dataset, load_dataset, read_curve_csv, DatasetManifest,
    ExtractionParams, SplitFractions,
};
use curvesig::groups::GroupKind;
use curvesig::net::{Activation, AdamConfig, TrainedModel};
use curvesig::signature::{build_signature, signature_discrepancy, Signature};
use curvesig::training::{
    train_arclength, train_curvature, ArcLengthConfig, CurvatureConfig, TrainOptions,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// Environment variable holding the default dataset directory for `train`.
const DATA_DIR_ENV: &str = "CURVESIG_DATA_DIR";

#[derive(Parser)]
#[command(name = "curvesig", version, about = "Invariant signatures of planar curves")]
struct Cli {
    /// Worker threads for data-parallel stages (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, extract or inspect curve datasets.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train invariant models.
    #[command(subcommand)]
    Train(TrainCommand),
    /// Axiomatic Euclidean signature of one curve.
    Baseline(BaselineArgs),
    /// Learned signature of one curve.
    Signature(SignatureArgs),
    /// Discrepancy between two signature files.
    Compare(CompareArgs),
    /// Overlay signature CSVs as an SVG plot.
    Plot(PlotArgs),
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Generate synthetic curves through the image pipeline.
    Synth(SynthArgs),
    /// Extract level curves from a directory of grayscale images.
    Extract(ExtractArgs),
    /// Print a manifest summary.
    Info(InfoArgs),
}

#[derive(Args, Serialize)]
struct SynthArgs {
    /// Number of curves to generate across all splits.
    #[arg(long)]
    count: usize,
    /// Output dataset root; splits go to train/, validation/, test/.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Side length of the synthetic images in pixels.
    #[arg(long, default_value_t = 320)]
    image_size: usize,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    #[arg(long, default_value_t = 200)]
    min_points: usize,
    /// Keep raw pixel coordinates instead of unit-RMS rescaling.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Serialize)]
struct ExtractArgs {
    /// Directory of PGM/PNG grayscale images.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.5)]
    level: f64,
    #[arg(long, default_value_t = 200)]
    min_points: usize,
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args, Serialize)]
struct InfoArgs {
    /// Path to a manifest.json.
    manifest: PathBuf,
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Train an invariant curvature model.
    Curvature(TrainArgs),
    /// Train an invariant arc-length model.
    Arclength(TrainArgs),
}

#[derive(Args, Serialize)]
struct TrainArgs {
    /// Transformation group: se2, e2, sa2 or a2.
    #[arg(long)]
    group: String,
    /// Dataset root (containing train/ and validation/) or a train
    /// manifest path. Falls back to $CURVESIG_DATA_DIR.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    steps: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Optional TOML or JSON file overriding training defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Where to write the loss history CSV (default: <out>.log.csv).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BaselineArgs {
    #[arg(long)]
    curve: PathBuf,
    /// Output prefix; writes <out>.csv and <out>.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SignatureArgs {
    /// Curvature model file.
    #[arg(long = "model-k")]
    model_k: PathBuf,
    /// Arc-length model file.
    #[arg(long = "model-s")]
    model_s: PathBuf,
    #[arg(long)]
    curve: PathBuf,
    /// Reference point index (s = 0 there).
    #[arg(long, default_value_t = 0)]
    reference: usize,
    /// Output prefix; writes <out>.csv and <out>.svg.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    sig1: PathBuf,
    sig2: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    /// Signature CSV files to overlay.
    #[arg(required = true)]
    signatures: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Plot curvature against sample position instead of arc-length.
    #[arg(long)]
    x_index: bool,
    #[arg(long, default_value = "")]
    title: String,
}

/// Optional config file, flat key namespace; every field overrides one
/// training default.
#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    batch_size: Option<usize>,
    hidden_dims: Option<Vec<usize>>,
    activation: Option<String>,
    learning_rate: Option<f64>,
    val_interval: Option<u64>,
    val_batch: Option<usize>,
    // Shared tuplet parameters.
    concentration: Option<f64>,
    cond_max: Option<f64>,
    det_range: Option<(f64, f64)>,
    // Curvature tuplets.
    half_width: Option<usize>,
    keep_ratio: Option<(f64, f64)>,
    num_negatives: Option<usize>,
    offset_range: Option<(usize, usize)>,
    // Arc-length tuplets.
    num_anchors: Option<usize>,
    section_len: Option<usize>,
    gap_range: Option<(usize, usize)>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let cfg = if path.extension().and_then(|e| e.to_str()) == Some("json") {
            serde_json::from_str(&text)
                .with_context(|| format!("malformed JSON config {}", path.display()))?
        } else {
            toml::from_str(&text)
                .with_context(|| format!("malformed TOML config {}", path.display()))?
        };
        Ok(cfg)
    }
}

/// Reproducibility snapshot written next to every output.
#[derive(Serialize)]
struct RunConfig<'a, T: Serialize> {
    command: &'a str,
    workers: usize,
    args: &'a T,
}

fn write_run_config<T: Serialize>(dir: &Path, command: &str, workers: usize, args: &T) -> Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let snapshot = RunConfig {
        command,
        workers,
        args,
    };
    let path = dir.join("run_config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&snapshot)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn out_dir_of(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .context("failed to size the worker pool")?;
    }
    match cli.command {
        Command::Dataset(cmd) => run_dataset(cmd, cli.workers),
        Command::Train(cmd) => run_train(cmd, cli.workers),
        Command::Baseline(args) => run_baseline(args, cli.workers),
        Command::Signature(args) => run_signature(args, cli.workers),
        Command::Compare(args) => run_compare(args, cli.workers),
        Command::Plot(args) => run_plot(args, cli.workers),
    }
}

fn extraction_from(sigma: f64, level: f64, min_points: usize, no_normalize: bool) -> ExtractionParams {
    ExtractionParams {
        sigma,
        level,
        min_points,
        normalize_scale: !no_normalize,
    }
}

fn run_dataset(cmd: DatasetCommand, workers: usize) -> Result<()> {
    match cmd {
        DatasetCommand::Synth(args) => {
            let extraction =
                extraction_from(args.sigma, args.level, args.min_points, args.no_normalize);
            let manifests = build_synthetic_dataset(
                &args.out,
                args.count,
                args.image_size,
                args.seed,
                extraction,
                SplitFractions::default(),
            )?;
            write_run_config(&args.out, "dataset synth", workers, &args)?;
            for m in &manifests {
                let manifest = DatasetManifest::load(m)?;
                println!("{}: {} curves ({})", manifest.split, manifest.files.len(), m.display());
            }
            Ok(())
        }
        DatasetCommand::Extract(args) => {
            let extraction =
                extraction_from(args.sigma, args.level, args.min_points, args.no_normalize);
            let manifests = extract_dataset(
                &args.input,
                &args.out,
                extraction,
                SplitFractions::default(),
            )?;
            write_run_config(&args.out, "dataset extract", workers, &args)?;
            for m in &manifests {
                let manifest = DatasetManifest::load(m)?;
                println!("{}: {} curves ({})", manifest.split, manifest.files.len(), m.display());
            }
            Ok(())
        }
        DatasetCommand::Info(args) => {
            let (manifest, curves) = load_dataset(&args.manifest)?;
            let total_points: usize = curves.iter().map(|c| c.len()).sum();
            let min = curves.iter().map(|c| c.len()).min().unwrap_or(0);
            let max = curves.iter().map(|c| c.len()).max().unwrap_or(0);
            println!("split: {}", manifest.split);
            println!("curves: {}", curves.len());
            println!("points: {total_points} (min {min}, max {max})");
            println!(
                "extraction: sigma {}, level {}, min_points {}, normalized {}",
                manifest.extraction.sigma,
                manifest.extraction.level,
                manifest.extraction.min_points,
                manifest.extraction.normalize_scale
            );
            for p in &manifest.provenance {
                println!("source: {p}");
            }
            Ok(())
        }
    }
}

/// Resolves --data to the train and validation manifests.
fn resolve_data(data: Option<PathBuf>) -> Result<(PathBuf, PathBuf)> {
    let data = match data {
        Some(d) => d,
        None => match std::env::var_os(DATA_DIR_ENV) {
            Some(dir) => PathBuf::from(dir),
            None => bail!("--data not given and {DATA_DIR_ENV} is unset"),
        },
    };
    if data.is_dir() {
        let train = data.join("train").join("manifest.json");
        let val = data.join("validation").join("manifest.json");
        if !train.exists() {
            bail!("no train manifest at {}", train.display());
        }
        Ok((train, val))
    } else {
        let val = data
            .parent()
            .and_then(Path::parent)
            .map(|root| root.join("validation").join("manifest.json"))
            .filter(|p| p.exists())
            .with_context(|| {
                format!(
                    "cannot find a validation manifest next to {}",
                    data.display()
                )
            })?;
        Ok((data, val))
    }
}

fn run_train(cmd: TrainCommand, workers: usize) -> Result<()> {
    let (kind, args) = match &cmd {
        TrainCommand::Curvature(a) => ("curvature", a),
        TrainCommand::Arclength(a) => ("arclength", a),
    };
    let group: GroupKind = args.group.parse()?;
    let file_cfg = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let (train_manifest, val_manifest) = resolve_data(args.data.clone())?;
    let (_, train_curves) = load_dataset(&train_manifest)?;
    let (_, val_curves) = load_dataset(&val_manifest)?;

    let mut opts = TrainOptions {
        steps: args.steps,
        seed: args.seed,
        ..TrainOptions::default()
    };
    if let Some(v) = file_cfg.batch_size {
        opts.batch_size = v;
    }
    if let Some(v) = &file_cfg.hidden_dims {
        opts.hidden_dims = v.clone();
    }
    if let Some(v) = &file_cfg.activation {
        opts.activation = match v.as_str() {
            "tanh" => Activation::Tanh,
            "relu" => Activation::Relu,
            other => bail!("unknown activation '{other}' (use tanh or relu)"),
        };
    }
    if let Some(v) = file_cfg.learning_rate {
        opts.adam = AdamConfig {
            learning_rate: v,
            ..AdamConfig::default()
        };
    }
    if let Some(v) = file_cfg.val_interval {
        opts.val_interval = v;
    }
    if let Some(v) = file_cfg.val_batch {
        opts.val_batch = v;
    }

    let dataset_id = train_manifest.display().to_string();
    let outcome = match &cmd {
        TrainCommand::Curvature(_) => {
            let mut cfg = CurvatureConfig::for_group(group);
            if let Some(v) = file_cfg.half_width {
                cfg.half_width = v;
            }
            if let Some(v) = file_cfg.keep_ratio {
                cfg.keep_ratio = v;
            }
            if let Some(v) = file_cfg.num_negatives {
                cfg.num_negatives = v;
            }
            if let Some(v) = file_cfg.offset_range {
                cfg.offset_range = v;
            }
            if let Some(v) = file_cfg.concentration {
                cfg.concentration = v;
            }
            if let Some(v) = file_cfg.cond_max {
                cfg.bounds.cond_max = v;
            }
            if let Some(v) = file_cfg.det_range {
                cfg.bounds.det_range = v;
            }
            train_curvature(&train_curves, &val_curves, &cfg, &opts, &dataset_id)?
        }
        TrainCommand::Arclength(_) => {
            let mut cfg = ArcLengthConfig::for_group(group);
            if let Some(v) = file_cfg.num_anchors {
                cfg.num_anchors = v;
            }
            if let Some(v) = file_cfg.section_len {
                cfg.section_len = v;
            }
            if let Some(v) = file_cfg.gap_range {
                cfg.gap_range = v;
            }
            if let Some(v) = file_cfg.concentration {
                cfg.concentration = v;
            }
            if let Some(v) = file_cfg.cond_max {
                cfg.bounds.cond_max = v;
            }
            if let Some(v) = file_cfg.det_range {
                cfg.bounds.det_range = v;
            }
            train_arclength(&train_curves, &val_curves, &cfg, &opts, &dataset_id)?
        }
    };
    outcome.model.save(&args.out)?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("log.csv"));
    outcome.log.save_csv(&log_path)?;
    write_run_config(&out_dir_of(&args.out), &format!("train {kind}"), workers, args)?;
    println!(
        "trained {kind} model for {group}: best validation loss {:.6} at step {} -> {}",
        outcome.best_val,
        outcome.best_step,
        args.out.display()
    );
    Ok(())
}

fn run_baseline(args: BaselineArgs, workers: usize) -> Result<()> {
    let curve = read_curve_csv(&args.curve)?;
    let sig = axiomatic_euclidean_signature(&curve)?;
    let csv = args.out.with_extension("csv");
    let svg = args.out.with_extension("svg");
    sig.save_csv(&csv)?;
    plot::emit_plot(
        &[plot::Series {
            name: "axiomatic".into(),
            points: sig.series(),
        }],
        "axiomatic Euclidean signature",
        "arc-length s",
        "curvature",
        &svg,
    )?;
    write_run_config(&out_dir_of(&args.out), "baseline", workers, &args)?;
    println!(
        "baseline signature: {} entries, total s {:.6} -> {}",
        sig.entries().len(),
        sig.total_arclength(),
        csv.display()
    );
    Ok(())
}

fn run_signature(args: SignatureArgs, workers: usize) -> Result<()> {
    let model_k = TrainedModel::load(&args.model_k)?;
    let model_s = TrainedModel::load(&args.model_s)?;
    if model_k.meta.group != model_s.meta.group {
        bail!(
            "model groups disagree: {} vs {}",
            model_k.meta.group,
            model_s.meta.group
        );
    }
    let curve = read_curve_csv(&args.curve)?;
    let sig = build_signature(&curve, &model_k, &model_s, args.reference, model_k.meta.group)?;
    let csv = args.out.with_extension("csv");
    let svg = args.out.with_extension("svg");
    sig.save_csv(&csv)?;
    plot::emit_plot(
        &[plot::Series {
            name: format!("{} signature", model_k.meta.group),
            points: sig.series(),
        }],
        "learned invariant signature",
        "invariant arc-length s",
        "invariant curvature",
        &svg,
    )?;
    write_run_config(&out_dir_of(&args.out), "signature", workers, &args)?;
    println!(
        "signature: {} entries, total s {:.6} -> {}",
        sig.entries().len(),
        sig.total_arclength(),
        csv.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct CompareReport {
    sig1: String,
    sig2: String,
    discrepancy: f64,
    overlap_s: f64,
    entries1: usize,
    entries2: usize,
}

fn run_compare(args: CompareArgs, workers: usize) -> Result<()> {
    let sig1 = Signature::load_csv(&args.sig1, GroupKind::Se2)?;
    let sig2 = Signature::load_csv(&args.sig2, GroupKind::Se2)?;
    let discrepancy = signature_discrepancy(&sig1, &sig2)?;
    let report = CompareReport {
        sig1: args.sig1.display().to_string(),
        sig2: args.sig2.display().to_string(),
        discrepancy,
        overlap_s: sig1.total_arclength().min(sig2.total_arclength()),
        entries1: sig1.entries().len(),
        entries2: sig2.entries().len(),
    };
    std::fs::write(&args.out, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    write_run_config(&out_dir_of(&args.out), "compare", workers, &args)?;
    println!("discrepancy {discrepancy:.6} -> {}", args.out.display());
    Ok(())
}

fn run_plot(args: PlotArgs, workers: usize) -> Result<()> {
    let mut series = Vec::new();
    for path in &args.signatures {
        let sig = Signature::load_csv(path, GroupKind::Se2)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        series.push(plot::Series {
            name,
            points: if args.x_index {
                sig.index_series()
            } else {
                sig.series()
            },
        });
    }
    let x_label = if args.x_index { "sample index" } else { "arc-length s" };
    plot::emit_plot(&series, &args.title, x_label, "curvature", &args.out)?;
    write_run_config(&out_dir_of(&args.out), "plot", workers, &args)?;
    println!("plot -> {}", args.out.display());
    Ok(())
}
