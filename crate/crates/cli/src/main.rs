//! `cyclelife` — battery cycle-life prognostics from NASA-schema cycle CSVs.
//!
//! Subcommands: `train`, `evaluate`, `grid`, `predict`, `synth`. Every
//! command is file-in/file-out, writes outputs atomically (temp then
//! rename), and drops a `<out>.manifest.json` beside its primary output.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (schema, parse,
//! missing or malformed files), 3 training diverged.

mod manifest;
mod output;
mod plot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use cyclelife::dataset::{parse_battery_csv, synthesize_fade_series, FadeModel, FadeShape};
use cyclelife::error::Error;
use cyclelife::eval::{compute_metrics, curves_to_csv, grid_search, GridSpec, Metrics};
use cyclelife::features::{
    build_supervised_set, split_holdout, DEFAULT_EOL_THRESHOLD, DEFAULT_RATED_CAPACITY_AH,
    FEATURE_COUNT, TARGET_COUNT,
};
use cyclelife::linalg::Matrix;
use cyclelife::model_io::{load_bundle, model_to_string, SavedBundle};
use cyclelife::net::{init_network, train, Activation, LayerSpec, NetworkSpec, TrainConfig};
use cyclelife::rng::mix64;

use manifest::RunManifest;
use output::StagedOutputs;
use plot::{capacity_plot_svg, BatterySeries};

#[derive(Parser)]
#[command(
    name = "cyclelife",
    version,
    about = "Battery cycle-life prognostics: SOH/RUL labeling, dense-network training, baselines, and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the dense network on a cycle CSV and write a model file.
    Train(TrainArgs),
    /// Score a saved model against a cycle CSV and write a metrics report.
    Evaluate(EvaluateArgs),
    /// Sweep hyperparameter combinations and write a ranked report.
    Grid(GridArgs),
    /// Predict capacity/SOH/RUL per row and write a predictions CSV.
    Predict(PredictArgs),
    /// Generate a synthetic capacity-fade CSV fixture.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ActivationArg {
    Tanh,
    Sigmoid,
    Relu,
}

impl From<ActivationArg> for Activation {
    fn from(a: ActivationArg) -> Activation {
        match a {
            ActivationArg::Tanh => Activation::Tanh,
            ActivationArg::Sigmoid => Activation::Sigmoid,
            ActivationArg::Relu => Activation::Relu,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ShapeArg {
    Linear,
    Exponential,
}

#[derive(Args)]
struct TrainArgs {
    /// Input cycle CSV.
    #[arg(long)]
    data: PathBuf,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Optional per-epoch curves CSV.
    #[arg(long)]
    curves: Option<PathBuf>,
    /// Layer unit counts, output head included.
    #[arg(long, default_value = "10,7,3")]
    layers: String,
    /// Hidden-layer activation (the output layer is linear).
    #[arg(long, value_enum, default_value_t = ActivationArg::Relu)]
    activation: ActivationArg,
    /// Dropout rate after each hidden layer.
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch_size: usize,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Fraction of rows held out for validation curves (0 disables).
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RATED_CAPACITY_AH)]
    rated_capacity: f64,
    #[arg(long, default_value_t = DEFAULT_EOL_THRESHOLD)]
    eol_threshold: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// Cycle CSV to score against.
    #[arg(long)]
    data: PathBuf,
    /// Output report (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    data: PathBuf,
    /// Output ranked report (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Semicolon-separated layer stacks, e.g. "10,7,3;8,4,3".
    #[arg(long, default_value = "10,7,3")]
    layers_list: String,
    /// Comma-separated hidden activations.
    #[arg(long, default_value = "relu")]
    activations: String,
    /// Comma-separated learning rates.
    #[arg(long, default_value = "0.001")]
    lrs: String,
    /// Comma-separated batch sizes.
    #[arg(long, default_value = "16")]
    batch_sizes: String,
    /// Comma-separated epoch counts.
    #[arg(long, default_value = "200")]
    epochs_list: String,
    /// Comma-separated dropout rates.
    #[arg(long, default_value = "0.2")]
    dropouts: String,
    /// Holdout fraction every combination is scored on.
    #[arg(long, default_value_t = 0.2)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_RATED_CAPACITY_AH)]
    rated_capacity: f64,
    #[arg(long, default_value_t = DEFAULT_EOL_THRESHOLD)]
    eol_threshold: f64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Output predictions CSV.
    #[arg(long)]
    out: PathBuf,
    /// Optional capacity-vs-cycle SVG.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Output cycle CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    cycles: u32,
    /// Initial capacity (Ah).
    #[arg(long, default_value_t = 2.0)]
    c0: f64,
    /// Per-cycle fade fraction.
    #[arg(long, default_value_t = 0.004)]
    rate: f64,
    /// Gaussian capacity noise (Ah).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, value_enum, default_value_t = ShapeArg::Linear)]
    shape: ShapeArg,
    #[arg(long, default_value = "SYN1")]
    battery_id: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn exit_code(err: &CliError) -> i32 {
    fn core_code(e: &Error) -> i32 {
        match e {
            Error::Diverged { .. } => 3,
            Error::InvalidArgument(_) => 1,
            Error::Fold { source, .. } => core_code(source),
            _ => 2,
        }
    }
    match err {
        CliError::Usage(_) => 1,
        CliError::Core(e) => core_code(e),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(1);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Synth(args) => cmd_synth(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn read_data_csv(path: &Path) -> Result<(String, cyclelife::dataset::BatteryDataset), CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Core(Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })?;
    let ds = parse_battery_csv(&text, path.display().to_string())?;
    Ok((text, ds))
}

fn parse_layer_stack(text: &str) -> Result<Vec<usize>, CliError> {
    let layers: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| {
            usage(format!(
                "--layers expects comma-separated integers, got `{text}`"
            ))
        })?;
    if layers.is_empty() || layers.contains(&0) {
        return Err(usage("layer unit counts must be positive"));
    }
    if *layers.last().expect("non-empty") != TARGET_COUNT {
        return Err(usage(format!(
            "the last layer must have {TARGET_COUNT} units (capacity, SOH, RUL heads), got {layers:?}"
        )));
    }
    Ok(layers)
}

fn network_spec(layers: &[usize], activation: Activation, dropout: f64, seed: u64) -> NetworkSpec {
    let layer_specs: Vec<LayerSpec> = layers
        .iter()
        .enumerate()
        .map(|(i, &units)| LayerSpec {
            units,
            activation: if i + 1 == layers.len() {
                Activation::Identity
            } else {
                activation
            },
        })
        .collect();
    NetworkSpec {
        input_dim: FEATURE_COUNT,
        layers: layer_specs,
        dropout: vec![dropout; layers.len() - 1],
        seed,
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&args.val_fraction) {
        return Err(usage(format!(
            "--val-fraction must be in [0, 1), got {}",
            args.val_fraction
        )));
    }
    let layers = parse_layer_stack(&args.layers)?;
    let (data_text, ds) = read_data_csv(&args.data)?;
    let set = build_supervised_set(&ds, args.rated_capacity, args.eol_threshold, None)?;

    let (train_set, val_set) = if args.val_fraction > 0.0 {
        let (tr, va) = split_holdout(&set, args.val_fraction, mix64(args.seed, 1))?;
        (tr, Some(va))
    } else {
        (set, None)
    };

    let spec = network_spec(
        &layers,
        args.activation.into(),
        args.dropout,
        mix64(args.seed, 2),
    );
    let mut net = init_network(&spec)?;
    println!("trainable parameters: {}", net.param_count());

    // The raw user seed drives the training stream so the model file's
    // training section echoes the value needed to reproduce the run; the
    // split and init streams are derived from it.
    let config = TrainConfig {
        learning_rate: args.lr,
        batch_size: args.batch_size,
        epochs: args.epochs,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let validation = val_set.as_ref().map(|v| (v.features(), v.targets()));
    let history = train(
        &mut net,
        train_set.features(),
        train_set.targets(),
        validation,
        &config,
    )?;
    net.attach_scaling(train_set.normalizer().clone(), train_set.labels().clone());

    if let Some(last) = history.epochs.last() {
        match (last.val_loss, last.val_mae) {
            (Some(vl), Some(vm)) => println!(
                "final epoch: train_loss={} train_mae={} val_loss={vl} val_mae={vm}",
                last.train_loss, last.train_mae
            ),
            _ => println!(
                "final epoch: train_loss={} train_mae={}",
                last.train_loss, last.train_mae
            ),
        }
    }

    let mut staged = StagedOutputs::new();
    staged.stage(&args.out, model_to_string(&net)?);
    if let Some(curves) = &args.curves {
        staged.stage(curves, curves_to_csv(&history));
    }

    let mut man = RunManifest::new("train", args.seed);
    man.flag("data", args.data.display())
        .flag("out", args.out.display())
        .flag("layers", &args.layers)
        .flag(
            "activation",
            format!("{:?}", args.activation).to_lowercase(),
        )
        .flag("dropout", args.dropout)
        .flag("lr", args.lr)
        .flag("batch-size", args.batch_size)
        .flag("epochs", args.epochs)
        .flag("val-fraction", args.val_fraction)
        .flag("seed", args.seed)
        .flag("rated-capacity", args.rated_capacity)
        .flag("eol-threshold", args.eol_threshold);
    if let Some(curves) = &args.curves {
        man.flag("curves", curves.display());
        man.output(curves);
    }
    man.input(&args.data, data_text.as_bytes());
    man.output(&args.out);
    staged.stage(RunManifest::path_for(&args.out), man.to_json());
    staged.commit()?;

    println!("model written to {}", args.out.display());
    Ok(())
}

#[derive(serde::Serialize)]
struct EvaluationReport {
    model_path: String,
    data_path: String,
    model_kind: String,
    row_count: usize,
    metrics: Metrics,
    /// r-squared of the capacity head.
    accuracy: Option<f64>,
    training: Option<cyclelife::net::TrainingMeta>,
}

type ScoringBundle = (
    Vec<u8>,
    SavedBundle,
    cyclelife::features::Normalizer,
    cyclelife::features::LabelScaling,
);

fn load_scoring_bundle(path: &Path) -> Result<ScoringBundle, CliError> {
    let bytes = fs::read(path).map_err(|e| {
        CliError::Core(Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        )))
    })?;
    let bundle = load_bundle(path)?;
    let normalizer = bundle
        .normalizer
        .clone()
        .ok_or_else(|| CliError::Core(Error::Format("model file lacks a normalizer".into())))?;
    let labels = bundle
        .labels
        .clone()
        .ok_or_else(|| CliError::Core(Error::Format("model file lacks label constants".into())))?;
    Ok((bytes, bundle, normalizer, labels))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let (model_bytes, bundle, normalizer, labels) = load_scoring_bundle(&args.model)?;
    let (data_text, ds) = read_data_csv(&args.data)?;
    let set = build_supervised_set(&ds, labels.rated_capacity_ah, labels.eol_threshold, None)?
        .rescale(&normalizer, &labels)?;
    let pred = bundle.model.predict_matrix(set.features())?;
    let metrics = compute_metrics(&pred, set.targets())?;
    let accuracy = metrics.accuracy();

    let report = EvaluationReport {
        model_path: args.model.display().to_string(),
        data_path: args.data.display().to_string(),
        model_kind: bundle.model.kind().to_string(),
        row_count: set.len(),
        metrics,
        accuracy,
        training: bundle.training.clone(),
    };
    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Core(Error::Format(e.to_string())))?;

    let mut staged = StagedOutputs::new();
    staged.stage(&args.out, report_json);
    let mut man = RunManifest::new("evaluate", bundle.training.as_ref().map_or(0, |t| t.seed));
    man.flag("model", args.model.display())
        .flag("data", args.data.display())
        .flag("out", args.out.display());
    man.input(&args.model, &model_bytes);
    man.input(&args.data, data_text.as_bytes());
    man.output(&args.out);
    staged.stage(RunManifest::path_for(&args.out), man.to_json());
    staged.commit()?;

    match accuracy {
        Some(a) => println!("accuracy (capacity-head r2): {a}"),
        None => println!("accuracy undefined (fewer than two rows)"),
    }
    println!("report written to {}", args.out.display());
    Ok(())
}

fn split_list<T, F>(text: &str, what: &str, parse: F) -> Result<Vec<T>, CliError>
where
    F: Fn(&str) -> Result<T, CliError>,
{
    let items: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(usage(format!("{what} axis is empty")));
    }
    items.into_iter().map(parse).collect()
}

fn cmd_grid(args: GridArgs) -> Result<(), CliError> {
    let layer_configs: Vec<Vec<usize>> = {
        let stacks: Vec<&str> = args
            .layers_list
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        if stacks.is_empty() {
            return Err(usage("--layers-list axis is empty"));
        }
        stacks
            .into_iter()
            .map(parse_layer_stack)
            .collect::<Result<_, _>>()?
    };
    let activations = split_list(&args.activations, "--activations", |s| {
        Activation::parse(s).map_err(|e| usage(e.to_string()))
    })?;
    let learning_rates = split_list(&args.lrs, "--lrs", |s| {
        s.parse::<f64>()
            .map_err(|_| usage(format!("bad learning rate `{s}`")))
    })?;
    let batch_sizes = split_list(&args.batch_sizes, "--batch-sizes", |s| {
        s.parse::<usize>()
            .map_err(|_| usage(format!("bad batch size `{s}`")))
    })?;
    let epoch_counts = split_list(&args.epochs_list, "--epochs-list", |s| {
        s.parse::<usize>()
            .map_err(|_| usage(format!("bad epoch count `{s}`")))
    })?;
    let dropout_rates = split_list(&args.dropouts, "--dropouts", |s| {
        s.parse::<f64>()
            .map_err(|_| usage(format!("bad dropout rate `{s}`")))
    })?;

    let grid = GridSpec {
        layer_configs,
        activations,
        learning_rates,
        batch_sizes,
        epoch_counts,
        dropout_rates,
        base_seed: args.seed,
    };
    let (data_text, ds) = read_data_csv(&args.data)?;
    let set = build_supervised_set(&ds, args.rated_capacity, args.eol_threshold, None)?;
    let split = cyclelife::features::SplitSpec::Holdout {
        test_fraction: args.val_fraction,
        seed: mix64(args.seed, 1),
    };
    let result = grid_search(&grid, &set, &split)?;

    let report_json = serde_json::to_string_pretty(&result)
        .map_err(|e| CliError::Core(Error::Format(e.to_string())))?;
    let mut staged = StagedOutputs::new();
    staged.stage(&args.out, report_json);
    let mut man = RunManifest::new("grid", args.seed);
    man.flag("data", args.data.display())
        .flag("out", args.out.display())
        .flag("layers-list", &args.layers_list)
        .flag("activations", &args.activations)
        .flag("lrs", &args.lrs)
        .flag("batch-sizes", &args.batch_sizes)
        .flag("epochs-list", &args.epochs_list)
        .flag("dropouts", &args.dropouts)
        .flag("val-fraction", args.val_fraction)
        .flag("seed", args.seed)
        .flag("rated-capacity", args.rated_capacity)
        .flag("eol-threshold", args.eol_threshold);
    man.input(&args.data, data_text.as_bytes());
    man.output(&args.out);
    staged.stage(RunManifest::path_for(&args.out), man.to_json());
    staged.commit()?;

    let best = result.best();
    let layers_text = best
        .combo
        .layers
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",");
    println!(
        "best: layers={layers_text} activation={} lr={} batch={} epochs={} dropout={} accuracy={} diverged={}",
        best.combo.activation.name(),
        best.combo.learning_rate,
        best.combo.batch_size,
        best.combo.epochs,
        best.combo.dropout,
        best.accuracy.map_or("n/a".to_string(), |a| a.to_string()),
        best.diverged
    );
    println!(
        "{} combinations evaluated; report written to {}",
        result.reports.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<(), CliError> {
    let (model_bytes, bundle, normalizer, labels) = load_scoring_bundle(&args.model)?;
    let (data_text, ds) = read_data_csv(&args.data)?;

    let raw_rows: Vec<Vec<f64>> = ds
        .records()
        .iter()
        .map(|r| vec![r.cycle as f64, r.time_s, r.voltage_v, r.current_a, r.temp_c])
        .collect();
    let raw = Matrix::from_rows(&raw_rows)?;
    let scaled = normalizer.apply(&raw)?;
    let pred = bundle.model.predict_matrix(&scaled)?;
    if pred.cols() != TARGET_COUNT {
        return Err(CliError::Core(Error::Format(format!(
            "model emits {} heads, expected {TARGET_COUNT}",
            pred.cols()
        ))));
    }

    let mut csv = String::from(
        "SampleId,Cycle,capacity_actual_ah,capacity_pred_ah,soh_pred,rul_pred_cycles\n",
    );
    let mut series: Vec<BatterySeries> = Vec::new();
    for (i, r) in ds.records().iter().enumerate() {
        let capacity_pred =
            pred.get(i, 0) * labels.capacity_overshoot_factor * labels.rated_capacity_ah;
        let soh_pred = pred.get(i, 1);
        let rul_pred = pred.get(i, 2) * labels.rul_denominator;
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.battery_id, r.cycle, r.capacity_ah, capacity_pred, soh_pred, rul_pred
        ));
        match series.iter_mut().find(|s| s.battery_id == r.battery_id) {
            Some(s) => s.points.push((r.cycle, r.capacity_ah, capacity_pred)),
            None => series.push(BatterySeries {
                battery_id: r.battery_id.clone(),
                points: vec![(r.cycle, r.capacity_ah, capacity_pred)],
            }),
        }
    }

    let mut staged = StagedOutputs::new();
    staged.stage(&args.out, csv);
    if let Some(plot_path) = &args.plot {
        staged.stage(plot_path, capacity_plot_svg(&series));
    }
    let mut man = RunManifest::new("predict", bundle.training.as_ref().map_or(0, |t| t.seed));
    man.flag("model", args.model.display())
        .flag("data", args.data.display())
        .flag("out", args.out.display());
    if let Some(plot_path) = &args.plot {
        man.flag("plot", plot_path.display());
        man.output(plot_path);
    }
    man.input(&args.model, &model_bytes);
    man.input(&args.data, data_text.as_bytes());
    man.output(&args.out);
    staged.stage(RunManifest::path_for(&args.out), man.to_json());
    staged.commit()?;

    println!("{} predictions written to {}", ds.len(), args.out.display());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let model = FadeModel {
        c0_ah: args.c0,
        rate: args.rate,
        noise_sigma: args.noise,
        shape: match args.shape {
            ShapeArg::Linear => FadeShape::Linear,
            ShapeArg::Exponential => FadeShape::Exponential,
        },
        seed: args.seed,
    };
    let ds = synthesize_fade_series(&model, args.cycles, &args.battery_id)?;

    let mut staged = StagedOutputs::new();
    staged.stage(&args.out, ds.to_csv_string());
    let mut man = RunManifest::new("synth", args.seed);
    man.flag("out", args.out.display())
        .flag("cycles", args.cycles)
        .flag("c0", args.c0)
        .flag("rate", args.rate)
        .flag("noise", args.noise)
        .flag("shape", format!("{:?}", args.shape).to_lowercase())
        .flag("battery-id", &args.battery_id)
        .flag("seed", args.seed);
    man.output(&args.out);
    staged.stage(RunManifest::path_for(&args.out), man.to_json());
    staged.commit()?;

    println!(
        "{} synthetic cycles written to {}",
        args.cycles,
        args.out.display()
    );
    Ok(())
}
