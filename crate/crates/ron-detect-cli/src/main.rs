//! Command-line front door for the RON-fingerprint Trojan detection
//! pipeline.
//!
//! Subcommands: `synth`, `train`, `classify`, `sweep`, `grid`, `bench`,
//! `report`. Every subcommand is deterministic given its full flag set
//! (including `--seed`), output files are written atomically (temp file
//! plus rename), and an optional `--config key=value` file can pre-populate
//! flags with explicit flags winning.
//!
//! Exit codes: 0 success, 1 solver non-convergence, 2 usage or
//! configuration error.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use ron_detect::classifiers::{
    balanced_class_weights, EnsembleMember, GnbParams, SvmParams, TieBreak, TrainedEnsemble,
    TrainedGnb, TrainedKnn, TrainedSvm,
};
use ron_detect::dataset::{self, LabeledDataset, Scaler};
use ron_detect::eval::{self, ClassifierKind, ClassifierSpec, HarnessConfig, ReportFormat, TuningConfig};
use ron_detect::model_io::{self, SavedModel, TrainedModel};
use ron_detect::synth::{self, SynthConfig};
use ron_detect::tuning::{self, GridSpec, ValidationOptions};
use ron_detect::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ron-detect",
    about = "Hardware Trojan detection from ring-oscillator-network frequency fingerprints",
    version
)]
struct Cli {
    /// Cap the worker thread count (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled dataset in the CSV schema
    Synth(SynthArgs),
    /// Train one model on a dataset and persist it (with its scaler)
    Train(TrainArgs),
    /// Classify a dataset with a saved model
    Classify(ClassifyArgs),
    /// Sweep KNN k values; emits plot-ready CSV
    Sweep(SweepArgs),
    /// Exhaustive SVM (C, gamma) grid search; emits per-cell CSV
    Grid(GridArgs),
    /// Run the full trial benchmark and write markdown + CSV reports
    Bench(BenchArgs),
    /// Re-render a long-form trial CSV as a report
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset path (CSV)
    #[arg(long)]
    out: PathBuf,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// key=value file pre-populating generator fields (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of chips [default: 32]
    #[arg(long)]
    chips: Option<usize>,
    /// Ring oscillators per chip [default: 8]
    #[arg(long)]
    ros: Option<usize>,
    /// Nominal RO frequency in Hz [default: 1e8]
    #[arg(long)]
    f_nominal: Option<f64>,
    /// Relative std of the per-chip offset [default: 5e-4]
    #[arg(long)]
    sigma_chip: Option<f64>,
    /// Relative std of the per-RO offset [default: 5e-4]
    #[arg(long)]
    sigma_ro: Option<f64>,
    /// Relative std of one measurement [default: 3e-3]
    #[arg(long)]
    sigma_meas: Option<f64>,
    /// Measurements averaged per frequency [default: 50]
    #[arg(long)]
    meas_avg: Option<usize>,
    /// Golden samples per chip [default: 2]
    #[arg(long)]
    golden_per_chip: Option<usize>,
    /// Trojan samples per chip [default: 23]
    #[arg(long)]
    trojan_per_chip: Option<usize>,
    /// Minimum relative frequency drop [default: 2e-4]
    #[arg(long)]
    drop_min: Option<f64>,
    /// Maximum relative frequency drop [default: 3e-2]
    #[arg(long)]
    drop_max: Option<f64>,
    /// Drop attenuation per RO index distance [default: 0.5]
    #[arg(long)]
    locality_decay: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Model kind: knn | svm | gnb | ensemble:<a+b[+c]>
    #[arg(long)]
    model: String,
    /// Output model path
    #[arg(long)]
    out: PathBuf,
    /// Frequency columns expected in the dataset [default: 8]
    #[arg(long)]
    n_features: Option<usize>,
    /// Neighbor count (required by knn members)
    #[arg(long)]
    k: Option<usize>,
    /// SVM penalty (required by svm members)
    #[arg(long)]
    c: Option<f64>,
    /// SVM RBF kernel width (required by svm members)
    #[arg(long)]
    gamma: Option<f64>,
    /// Weight SVM penalties by inverse class frequency [default: true]
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    balanced: bool,
    /// Tie rule: prefer_positive | prefer_negative [default: prefer_positive]
    #[arg(long)]
    tie_break: Option<TieBreak>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Saved model path
    #[arg(long)]
    model: PathBuf,
    /// Dataset to classify (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Output predictions path (CSV)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Training dataset (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path (param,accuracy,fpr,fnr)
    #[arg(long)]
    out: PathBuf,
    /// key=value file pre-populating flags (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Smallest k [default: 1]
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest k [default: 40]
    #[arg(long)]
    k_max: Option<usize>,
    /// Validation resplits per k [default: 10]
    #[arg(long)]
    reps: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Chip fraction on the fit side of each resplit [default: 0.75]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Frequency columns expected in the dataset [default: 8]
    #[arg(long)]
    n_features: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    /// Training dataset (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Output CSV path (param,accuracy,fpr,fnr; param is "C;gamma")
    #[arg(long)]
    out: PathBuf,
    /// key=value file pre-populating flags (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated C candidates [default: 0.01,0.1,1,10,100,1000]
    #[arg(long)]
    c_values: Option<String>,
    /// Comma-separated gamma candidates [default: 0.001,0.01,0.1,1,10]
    #[arg(long)]
    gamma_values: Option<String>,
    /// Validation resplits per cell [default: 10]
    #[arg(long)]
    reps: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Chip fraction on the fit side of each resplit [default: 0.75]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Weight SVM penalties by inverse class frequency [default: true]
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    balanced: bool,
    /// Frequency columns expected in the dataset [default: 8]
    #[arg(long)]
    n_features: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// Dataset (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated classifier tokens
    /// [default: knn,svm,gnb,ensemble:knn+svm+gnb,ensemble:knn+svm,ensemble:knn+gnb,ensemble:svm+gnb]
    #[arg(long)]
    classifiers: Option<String>,
    /// Comma-separated training sizes in chips [default: 6,12,24]
    #[arg(long)]
    sizes: Option<String>,
    /// Trials per (classifier, size) [default: 20]
    #[arg(long)]
    trials: Option<usize>,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Markdown report output path
    #[arg(long)]
    out_md: Option<PathBuf>,
    /// Long-form per-trial CSV output path
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// key=value file pre-populating flags (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Tie rule: prefer_positive | prefer_negative [default: prefer_positive]
    #[arg(long)]
    tie_break: Option<TieBreak>,
    /// Weight SVM penalties by inverse class frequency [default: true]
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    balanced: bool,
    /// Re-tune on every trial instead of once per size [default: false]
    #[arg(long)]
    tune_per_trial: bool,
    /// Fix k instead of tuning it
    #[arg(long)]
    k: Option<usize>,
    /// Fix the SVM penalty instead of tuning it (with --gamma)
    #[arg(long)]
    c: Option<f64>,
    /// Fix the SVM kernel width instead of tuning it (with --c)
    #[arg(long)]
    gamma: Option<f64>,
    /// Smallest swept k [default: 1]
    #[arg(long)]
    k_min: Option<usize>,
    /// Largest swept k [default: 40]
    #[arg(long)]
    k_max: Option<usize>,
    /// Validation resplits while tuning [default: 10]
    #[arg(long)]
    reps: Option<usize>,
    /// Accuracy slack for k selection [default: 0.02]
    #[arg(long)]
    acc_slack: Option<f64>,
    /// Chip fraction on the fit side of tuning resplits [default: 0.75]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Frequency columns expected in the dataset [default: 8]
    #[arg(long)]
    n_features: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Long-form trial CSV (as written by bench --out-csv)
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Output path
    #[arg(long)]
    out: PathBuf,
    /// Output format: markdown | csv [default: markdown]
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Convergence { .. } => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Report(args) => cmd_report(args),
    }
}

// ── config-file fallback ─────────────────────────────────────────────────

fn load_kv(path: &Path) -> Result<HashMap<String, String>> {
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::Format(format!("line {}: expected key=value, got {raw:?}", idx + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// flag value, else config-file value, else default
fn resolve<T: FromStr + Clone>(
    flag: &Option<T>,
    kv: &HashMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    match kv.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| Error::Format(format!("bad config value {key}={raw}"))),
        None => Ok(default),
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp-partial");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>> {
    raw.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad {what} value {t:?}")))
        })
        .collect()
}

fn parse_usize_list(raw: &str, what: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Argument(format!("bad {what} value {t:?}")))
        })
        .collect()
}

fn load_data(path: &Path, n_features: usize) -> Result<LabeledDataset> {
    dataset::load_csv_with(path, n_features)
}

// ── subcommands ──────────────────────────────────────────────────────────

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => SynthConfig::from_key_value(&fs::read_to_string(path)?)?,
        None => SynthConfig::default(),
    };
    // explicit flags win over the config file
    if let Some(v) = args.chips {
        cfg.n_chips = v;
    }
    if let Some(v) = args.ros {
        cfg.n_ros = v;
    }
    if let Some(v) = args.f_nominal {
        cfg.f_nominal = v;
    }
    if let Some(v) = args.sigma_chip {
        cfg.sigma_chip_rel = v;
    }
    if let Some(v) = args.sigma_ro {
        cfg.sigma_ro_rel = v;
    }
    if let Some(v) = args.sigma_meas {
        cfg.sigma_meas_rel = v;
    }
    if let Some(v) = args.meas_avg {
        cfg.n_meas_avg = v;
    }
    if let Some(v) = args.golden_per_chip {
        cfg.n_golden_per_chip = v;
    }
    if let Some(v) = args.trojan_per_chip {
        cfg.n_trojan_per_chip = v;
    }
    if let Some(v) = args.drop_min {
        cfg.trojan_drop_rel_min = v;
    }
    if let Some(v) = args.drop_max {
        cfg.trojan_drop_rel_max = v;
    }
    if let Some(v) = args.locality_decay {
        cfg.locality_decay = v;
    }
    let seed = args.seed.unwrap_or(0);
    let data = synth::generate(&cfg, seed)?;
    write_atomic(&args.out, &dataset::to_csv_string(&data))?;
    println!(
        "wrote {} samples from {} chips to {}",
        data.n_samples(),
        data.n_chips(),
        args.out.display()
    );
    Ok(())
}

fn train_member(
    kind: ClassifierKind,
    train_std: &LabeledDataset,
    args: &TrainArgs,
    tie: TieBreak,
) -> Result<EnsembleMember> {
    Ok(match kind {
        ClassifierKind::Knn => {
            let k = args
                .k
                .ok_or_else(|| Error::Argument("--k is required for knn members".into()))?;
            EnsembleMember::Knn(TrainedKnn::fit(train_std, k)?)
        }
        ClassifierKind::Svm => {
            let (c, gamma) = args.c.zip(args.gamma).ok_or_else(|| {
                Error::Argument("--c and --gamma are required for svm members".into())
            })?;
            let weights = if args.balanced {
                Some(balanced_class_weights(train_std)?)
            } else {
                None
            };
            EnsembleMember::Svm(TrainedSvm::fit(
                train_std,
                &SvmParams {
                    c,
                    gamma,
                    class_weights: weights,
                    tie_break: tie,
                    ..SvmParams::default()
                },
            )?)
        }
        ClassifierKind::Gnb => EnsembleMember::Gnb(TrainedGnb::fit_with(
            train_std,
            &GnbParams {
                tie_break: tie,
                ..GnbParams::default()
            },
        )?),
    })
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let spec = ClassifierSpec::parse(&args.model)?;
    let data = load_data(&args.data, args.n_features.unwrap_or(8))?;
    let scaler = Scaler::fit(&data)?;
    let train_std = scaler.apply(&data)?;
    let tie = args.tie_break.unwrap_or_default();

    let model = if spec.is_ensemble() {
        let members = spec
            .kinds()
            .iter()
            .map(|&kind| train_member(kind, &train_std, &args, tie))
            .collect::<Result<Vec<_>>>()?;
        TrainedModel::Ensemble(TrainedEnsemble::new(members, tie)?)
    } else {
        match train_member(spec.kinds()[0], &train_std, &args, tie)? {
            EnsembleMember::Knn(m) => TrainedModel::Knn(m),
            EnsembleMember::Svm(m) => TrainedModel::Svm(m),
            EnsembleMember::Gnb(m) => TrainedModel::Gnb(m),
        }
    };
    let saved = SavedModel { scaler, model };
    write_atomic(&args.out, &model_io::write_model(&saved))?;
    println!(
        "trained {} on {} samples -> {}",
        spec.name(),
        data.n_samples(),
        args.out.display()
    );
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let saved = model_io::load_model(&args.model)?;
    let data = load_data(&args.data, saved.scaler.n_features())?;
    let predictions = saved.predict_dataset(&data)?;
    let mut out = String::from("chip_id,region_id,predicted_label,score\n");
    for (sample, (label, score)) in data.samples().iter().zip(&predictions) {
        out.push_str(&format!(
            "{},{},{},{}\n",
            sample.chip_id(),
            sample.region_id(),
            label,
            score
        ));
    }
    write_atomic(&args.out, &out)?;
    println!(
        "classified {} samples -> {}",
        data.n_samples(),
        args.out.display()
    );
    Ok(())
}

fn sweep_csv(results: &[tuning::SweepResult]) -> String {
    let mut out = String::from("param,accuracy,fpr,fnr\n");
    for r in results {
        out.push_str(&format!("{},{},{},{}\n", r.param, r.accuracy, r.fpr, r.fnr));
    }
    out
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let kv = match &args.config {
        Some(p) => load_kv(p)?,
        None => HashMap::new(),
    };
    let k_min = resolve(&args.k_min, &kv, "k_min", 1)?;
    let k_max = resolve(&args.k_max, &kv, "k_max", 40)?;
    let reps = resolve(&args.reps, &kv, "reps", 10)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let train_fraction = resolve(&args.train_fraction, &kv, "train_fraction", 0.75)?;
    let n_features = resolve(&args.n_features, &kv, "n_features", 8)?;

    let data = load_data(&args.data, n_features)?;
    let options = ValidationOptions {
        train_fraction,
        ..ValidationOptions::default()
    };
    let results = tuning::k_sweep_with(&data, k_min, k_max, reps, seed, &options)?;
    write_atomic(&args.out, &sweep_csv(&results))?;
    let chosen = tuning::select_k(&results)?;
    println!("swept k {k_min}..={k_max}; selected k = {chosen}");
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let kv = match &args.config {
        Some(p) => load_kv(p)?,
        None => HashMap::new(),
    };
    let reps = resolve(&args.reps, &kv, "reps", 10)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let train_fraction = resolve(&args.train_fraction, &kv, "train_fraction", 0.75)?;
    let n_features = resolve(&args.n_features, &kv, "n_features", 8)?;
    let c_raw = resolve(
        &args.c_values,
        &kv,
        "c_values",
        "0.01,0.1,1,10,100,1000".to_string(),
    )?;
    let gamma_raw = resolve(
        &args.gamma_values,
        &kv,
        "gamma_values",
        "0.001,0.01,0.1,1,10".to_string(),
    )?;
    let grid = GridSpec {
        c_values: parse_f64_list(&c_raw, "C")?,
        gamma_values: parse_f64_list(&gamma_raw, "gamma")?,
    };
    let data = load_data(&args.data, n_features)?;
    let options = ValidationOptions {
        train_fraction,
        balanced_svm: args.balanced,
        ..ValidationOptions::default()
    };
    let table = tuning::evaluate_grid_with(&data, &grid, reps, seed, &options)?;
    write_atomic(&args.out, &sweep_csv(&table))?;
    let best = tuning::pick_best_cell(&table).expect("validated grid is non-empty");
    println!("best cell: {} (accuracy {:.3}, fpr {:.3})", best.param, best.accuracy, best.fpr);
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let kv = match &args.config {
        Some(p) => load_kv(p)?,
        None => HashMap::new(),
    };
    let tokens = resolve(
        &args.classifiers,
        &kv,
        "classifiers",
        "knn,svm,gnb,ensemble:knn+svm+gnb,ensemble:knn+svm,ensemble:knn+gnb,ensemble:svm+gnb"
            .to_string(),
    )?;
    let sizes_raw = resolve(&args.sizes, &kv, "sizes", "6,12,24".to_string())?;
    let trials = resolve(&args.trials, &kv, "trials", 20)?;
    let seed = resolve(&args.seed, &kv, "seed", 0)?;
    let n_features = resolve(&args.n_features, &kv, "n_features", 8)?;
    let k_min = resolve(&args.k_min, &kv, "k_min", 1)?;
    let k_max = resolve(&args.k_max, &kv, "k_max", 40)?;
    let reps = resolve(&args.reps, &kv, "reps", 10)?;
    let acc_slack = resolve(&args.acc_slack, &kv, "acc_slack", 0.02)?;
    let train_fraction = resolve(&args.train_fraction, &kv, "train_fraction", 0.75)?;

    let mut specs = Vec::new();
    for token in tokens.split(',') {
        let mut spec = ClassifierSpec::parse(token.trim())?;
        if let Some(k) = args.k {
            spec = spec.with_fixed_k(k);
        }
        if let (Some(c), Some(gamma)) = (args.c, args.gamma) {
            spec = spec.with_fixed_svm(c, gamma);
        }
        specs.push(spec);
    }
    let data = load_data(&args.data, n_features)?;
    let cfg = HarnessConfig {
        sizes: parse_usize_list(&sizes_raw, "size")?,
        n_trials: trials,
        seed,
        tie_break: args.tie_break.unwrap_or_default(),
        balanced_svm: args.balanced,
        tune_per_trial: args.tune_per_trial,
        tuning: TuningConfig {
            k_range: (k_min, k_max),
            grid: GridSpec::default(),
            n_reps: reps,
            acc_slack,
            train_fraction,
        },
    };
    let report = eval::run_trials(&data, &specs, &cfg)?;
    let md = eval::emit_report(&report, ReportFormat::Markdown)?;
    if let Some(path) = &args.out_md {
        write_atomic(path, &md)?;
    }
    if let Some(path) = &args.out_csv {
        write_atomic(path, &eval::emit_report(&report, ReportFormat::Csv)?)?;
    }
    print!("{md}");
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.input)?;
    let report = eval::parse_trial_csv(&text)?;
    let format = match args.format.as_deref().unwrap_or("markdown") {
        "markdown" => ReportFormat::Markdown,
        "csv" => ReportFormat::Csv,
        other => {
            return Err(Error::Argument(format!(
                "unknown format {other:?}; expected markdown or csv"
            )))
        }
    };
    write_atomic(&args.out, &eval::emit_report(&report, format)?)?;
    println!("wrote report to {}", args.out.display());
    Ok(())
}
