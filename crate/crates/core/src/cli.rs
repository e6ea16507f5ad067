//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 data or format, 3 model, 4 divergence.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{
    fit_normalizer, load_session, load_windows, make_windows, split_windows, write_synthetic,
    SplitMode, SynthConfig, TransitionPolicy,
};
use crate::error::Error;
use crate::kv::{join, KeyValues};
use crate::layers::AdamConfig;
use crate::metrics::{CiUnit, Confidence};
use crate::model::{load_model, save_model};
use crate::runtime::{bench_latency, epoch_log_csv, evaluate, predict_windows, train, TrainConfig};
use crate::{build_model, Model, ModelConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "consgrunet", version, about = "sEMG gesture recognition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write seeded synthetic ESF1 sessions, one per class.
    MakeSynth(MakeSynthArgs),
    /// Train a model on a directory of ESF1 sessions.
    Train(TrainArgs),
    /// Evaluate a model and write per-class and confusion CSVs.
    Eval(EvalArgs),
    /// Classify every window of one session.
    Predict(PredictArgs),
    /// Time single-window inference.
    Bench(BenchArgs),
    /// Print a model's configuration, parameter counts and file size.
    Info(InfoArgs),
}

#[derive(Debug, Args)]
struct MakeSynthArgs {
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Number of classes.
    #[arg(long, default_value_t = 8)]
    classes: usize,
    /// Channels per sample.
    #[arg(long, default_value_t = 10)]
    channels: usize,
    /// Window length in samples.
    #[arg(long, default_value_t = 20)]
    window: usize,
    /// Windows per class.
    #[arg(long = "per-class", default_value_t = 200)]
    per_class: usize,
    /// Standard deviation of the additive Gaussian noise.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// RNG seed.
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Directory of .esf session files.
    #[arg(long)]
    data: PathBuf,
    /// key=value file with architecture, optimizer and split settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output model file.
    #[arg(long)]
    out: PathBuf,
    /// Output per-epoch CSV log.
    #[arg(long)]
    log: PathBuf,
    /// Split protocol: random or by-rep. Overrides the config file.
    #[arg(long)]
    split: Option<String>,
    /// Seed for initialization, split and shuffling. Overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Directory of .esf session files.
    #[arg(long)]
    data: PathBuf,
    /// Output per-class CSV.
    #[arg(long)]
    report: PathBuf,
    /// Output confusion-matrix CSV.
    #[arg(long)]
    confusion: PathBuf,
    /// Confidence-interval sample unit: batch (64 windows) or window.
    #[arg(long = "ci-unit", default_value = "batch")]
    ci_unit: String,
    /// Confidence level: 0.90, 0.95 or 0.99.
    #[arg(long, default_value = "0.95")]
    confidence: String,
    /// Windows to evaluate: test (the training split's test partition), val, train or all.
    #[arg(long, default_value = "test")]
    subset: String,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// One .esf session file.
    #[arg(long)]
    session: PathBuf,
    /// Output CSV of offset,predicted_class,confidence.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
    /// Timed iterations.
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Untimed warmup iterations.
    #[arg(long, default_value_t = 50)]
    warmup: usize,
    /// Time input normalization along with the forward pass.
    #[arg(long = "with-preprocessing")]
    with_preprocessing: bool,
}

#[derive(Debug, Args)]
struct InfoArgs {
    /// Model file.
    #[arg(long)]
    model: PathBuf,
}

/// A failure with its exit code and a message naming the file or flag.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    fn usage(flag: &str, e: impl std::fmt::Display) -> Self {
        CliError::new(EXIT_USAGE, format!("{flag}: {e}"))
    }

    fn data(path: &Path, e: Error) -> Self {
        let code = match e {
            Error::Divergence { .. } => EXIT_DIVERGENCE,
            _ => EXIT_DATA,
        };
        CliError::new(code, with_path(path, e))
    }

    fn model(path: &Path, e: Error) -> Self {
        CliError::new(EXIT_MODEL, with_path(path, e))
    }
}

/// Prefixes the path unless the error already names it.
fn with_path(path: &Path, e: Error) -> String {
    match e {
        Error::Io { .. } => e.to_string(),
        e => format!("{}: {e}", path.display()),
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code. Normal output goes to `out`, diagnostics to `err`.
pub fn run_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Command::MakeSynth(a) => make_synth(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
        Command::Predict(a) => predict_cmd(a),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Info(a) => info_cmd(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    std::fs::write(path, contents).map_err(|e| CliError::data(path, Error::io(path, e)))
}

fn make_synth(a: MakeSynthArgs, out: &mut dyn Write) -> CliResult {
    let cfg = SynthConfig {
        num_classes: a.classes,
        channels: a.channels,
        window_len: a.window,
        windows_per_class: a.per_class,
        noise_sd: a.noise,
        seed: a.seed,
    };
    let files = write_synthetic(&a.out, &cfg).map_err(|e| match e {
        Error::Config(m) => CliError::new(EXIT_USAGE, m),
        e => CliError::data(&a.out, e),
    })?;
    let _ = writeln!(out, "wrote {} sessions to {}", files.len(), a.out.display());
    Ok(())
}

/// Windowing and split settings shared by `train`, `eval` and `predict`.
/// Training stores them in the model header so evaluation can re-derive the
/// same partitions.
#[derive(Clone, Debug, PartialEq)]
struct DataPlan {
    stride: usize,
    policy: TransitionPolicy,
    split: SplitMode,
    seed: u64,
}

const PLAN_KEYS: [&str; 6] = [
    "window_stride",
    "window_policy",
    "split",
    "split_fractions",
    "split_test_reps",
    "split_val_reps",
];

impl DataPlan {
    /// Reads the plan keys from `kv`, removing them.
    fn take_from_kv(kv: &mut KeyValues, seed: u64) -> crate::Result<Self> {
        let stride = kv.take_parsed("window_stride", 10usize)?;
        let policy = kv.take_parsed("window_policy", TransitionPolicy::Majority)?;
        let tag = kv.take("split").unwrap_or_else(|| "random".into());
        let fractions: Option<Vec<f64>> = kv.take_list("split_fractions")?;
        let test_reps: Option<Vec<u8>> = kv.take_list("split_test_reps")?;
        let val_reps: Option<Vec<u8>> = kv.take_list("split_val_reps")?;
        let split = split_mode(&tag, fractions, test_reps, val_reps)?;
        Ok(DataPlan {
            stride,
            policy,
            split,
            seed,
        })
    }

    fn write_kv(&self, map: &mut std::collections::BTreeMap<String, String>) {
        map.insert("window_stride".into(), self.stride.to_string());
        map.insert("window_policy".into(), self.policy.to_string());
        map.insert("split".into(), self.split.tag().into());
        match &self.split {
            SplitMode::Random { train, val, test } => {
                map.insert("split_fractions".into(), join(&[*train, *val, *test]));
            }
            SplitMode::ByRepetition { test_reps, val_reps } => {
                map.insert("split_test_reps".into(), join(test_reps));
                map.insert("split_val_reps".into(), join(val_reps));
            }
        }
    }

    /// The plan recorded in a model header, with defaults for absent keys.
    fn from_model(m: &Model) -> crate::Result<Self> {
        let mut kv = KeyValues::new();
        for k in PLAN_KEYS {
            if let Some(v) = m.meta.get(k) {
                kv.set(k, v);
            }
        }
        DataPlan::take_from_kv(&mut kv, m.config.seed)
    }
}

fn split_mode(
    tag: &str,
    fractions: Option<Vec<f64>>,
    test_reps: Option<Vec<u8>>,
    val_reps: Option<Vec<u8>>,
) -> crate::Result<SplitMode> {
    match tag {
        "random" => match fractions.as_deref() {
            None => Ok(SplitMode::default()),
            Some(&[train, val, test]) => Ok(SplitMode::Random { train, val, test }),
            Some(f) => Err(Error::Config(format!(
                "split_fractions needs three values (train,val,test), got {}",
                f.len()
            ))),
        },
        "by-rep" => {
            let SplitMode::ByRepetition {
                test_reps: dt,
                val_reps: dv,
            } = SplitMode::by_repetition_default()
            else {
                unreachable!()
            };
            Ok(SplitMode::ByRepetition {
                test_reps: test_reps.unwrap_or(dt),
                val_reps: val_reps.unwrap_or(dv),
            })
        }
        other => Err(Error::Config(format!("unknown split {other:?} (random|by-rep)"))),
    }
}

/// Everything a `train --config` file can set.
#[derive(Debug)]
struct TrainFile {
    model: ModelConfig,
    train: TrainConfig,
    plan: DataPlan,
}

fn parse_train_file(text: &str, split_flag: Option<&str>, seed_flag: Option<u64>) -> crate::Result<TrainFile> {
    let mut kv = KeyValues::parse(text)?;
    if let Some(s) = split_flag {
        kv.take("split");
        kv.set("split", s);
    }
    let mut model = ModelConfig::take_from_kv(&mut kv)?;
    if let Some(s) = seed_flag {
        model.seed = s;
    }
    let d = TrainConfig::default();
    let da = AdamConfig::default();
    let train = TrainConfig {
        epochs: kv.take_parsed("epochs", d.epochs)?,
        batch_size: kv.take_parsed("batch_size", d.batch_size)?,
        adam: AdamConfig {
            lr: kv.take_parsed("lr", da.lr)?,
            beta1: kv.take_parsed("beta1", da.beta1)?,
            beta2: kv.take_parsed("beta2", da.beta2)?,
            eps: kv.take_parsed("eps", da.eps)?,
        },
        seed: model.seed,
    };
    let plan = DataPlan::take_from_kv(&mut kv, model.seed)?;
    kv.finish()?;
    model.validate()?;
    train.validate()?;
    Ok(TrainFile { model, train, plan })
}

fn train_cmd(a: TrainArgs, out: &mut dyn Write) -> CliResult {
    let text = match &a.config {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::new(EXIT_USAGE, format!("--config {}: {e}", p.display())))?,
        None => String::new(),
    };
    let flag = if a.config.is_some() { "--config" } else { "train" };
    let tf = parse_train_file(&text, a.split.as_deref(), a.seed).map_err(|e| {
        let origin = a.config.as_ref().map_or(flag.to_string(), |p| format!("--config {}", p.display()));
        CliError::new(EXIT_USAGE, format!("{origin}: {e}"))
    })?;

    let windows = load_windows(&a.data, tf.model.window_len, tf.plan.stride, tf.plan.policy)
        .map_err(|e| CliError::data(&a.data, e))?;
    if let Some(w) = windows.iter().find(|w| w.values.shape()[1] != tf.model.input_channels) {
        return Err(CliError::new(
            EXIT_DATA,
            format!(
                "{}: sessions have {} channels but input_channels is {}",
                a.data.display(),
                w.values.shape()[1],
                tf.model.input_channels
            ),
        ));
    }
    let split = split_windows(&windows, tf.plan.split.clone(), tf.plan.seed)
        .map_err(|e| CliError::usage("--split", e))?;
    let mut model: Model = build_model(&tf.model).map_err(|e| CliError::usage("--config", e))?;
    model.normalizer = fit_normalizer(&windows, &split.train).map_err(|e| CliError::data(&a.data, e))?;
    tf.plan.write_kv(&mut model.meta);

    let (model, logs) = train(model, &windows, &split, tf.train).map_err(|e| match e {
        Error::Divergence { .. } => CliError::new(EXIT_DIVERGENCE, e.to_string()),
        Error::Label(_) => CliError::data(&a.data, e),
        e => CliError::usage("train", e),
    })?;
    save_model(&model, &a.out).map_err(|e| CliError::model(&a.out, e))?;
    write_file(&a.log, epoch_log_csv(&logs))?;
    if let Some(last) = logs.last() {
        let _ = writeln!(
            out,
            "epochs={} train_acc={:.4} val_acc={:.4} best_val_acc={:.4} windows={}/{}/{}",
            logs.len(),
            last.train_acc,
            last.val_acc,
            logs.iter().map(|l| l.val_acc).fold(0.0, f64::max),
            split.train.len(),
            split.val.len(),
            split.test.len()
        );
    }
    Ok(())
}

fn open_model(path: &Path) -> CliResult<Model> {
    load_model(path).map_err(|e| CliError::model(path, e))
}

fn eval_cmd(a: EvalArgs, out: &mut dyn Write) -> CliResult {
    let ci_unit: CiUnit = a.ci_unit.parse().map_err(|e| CliError::usage("--ci-unit", e))?;
    let confidence = match a.confidence.as_str() {
        "0.90" | "0.9" => Confidence::P90,
        "0.95" => Confidence::P95,
        "0.99" => Confidence::P99,
        c => return Err(CliError::usage("--confidence", format!("{c} is not one of 0.90, 0.95, 0.99"))),
    };
    let model = open_model(&a.model)?;
    let plan = DataPlan::from_model(&model).map_err(|e| CliError::model(&a.model, e))?;
    let windows = load_windows(&a.data, model.config.window_len, plan.stride, plan.policy)
        .map_err(|e| CliError::data(&a.data, e))?;
    let indices = match a.subset.as_str() {
        "all" => (0..windows.len()).collect(),
        part @ ("test" | "val" | "train") => {
            let s = split_windows(&windows, plan.split.clone(), plan.seed)
                .map_err(|e| CliError::model(&a.model, e))?;
            match part {
                "test" => s.test,
                "val" => s.val,
                _ => s.train,
            }
        }
        other => {
            return Err(CliError::usage(
                "--subset",
                format!("unknown subset {other:?} (test|val|train|all)"),
            ))
        }
    };
    let report = evaluate(&model, &windows, &indices, ci_unit, confidence).map_err(|e| match e {
        Error::Dimension(_) => CliError::model(&a.model, e),
        e => CliError::data(&a.data, e),
    })?;
    write_file(&a.report, report.report_csv())?;
    write_file(&a.confusion, report.confusion_csv())?;
    let _ = writeln!(out, "{}", report.summary_line());
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> CliResult {
    let model = open_model(&a.model)?;
    let plan = DataPlan::from_model(&model).map_err(|e| CliError::model(&a.model, e))?;
    let session = load_session(&a.session).map_err(|e| CliError::data(&a.session, e))?;
    if session.channels() != model.config.input_channels {
        return Err(CliError::new(
            EXIT_DATA,
            format!(
                "{}: session has {} channels, model expects {}",
                a.session.display(),
                session.channels(),
                model.config.input_channels
            ),
        ));
    }
    let windowed = make_windows(&session, model.config.window_len, plan.stride, TransitionPolicy::Majority)
        .map_err(|e| CliError::data(&a.session, e))?;
    if let Some(w) = &windowed.warning {
        log::warn!("{}: {w}", a.session.display());
    }
    let preds = predict_windows(&model, &windowed.windows).map_err(|e| CliError::model(&a.model, e))?;
    let mut csv = String::from("offset,predicted_class,confidence\n");
    for (w, p) in windowed.windows.iter().zip(&preds) {
        writeln!(csv, "{},{},{:.4}", w.offset, p.class, p.confidence).unwrap();
    }
    write_file(&a.out, csv)
}

fn bench_cmd(a: BenchArgs, out: &mut dyn Write) -> CliResult {
    if a.iters == 0 {
        return Err(CliError::usage("--iters", "must be ≥ 1"));
    }
    let model = open_model(&a.model)?;
    let [c, l] = model.input_shape();
    // Deterministic raw window around the normalizer's mean.
    let values = (0..c * l)
        .map(|i| {
            let ch = i / l;
            model.normalizer.mean[ch] + model.normalizer.std[ch] * ((i as f32) * 0.37).sin()
        })
        .collect();
    let window = crate::Tensor::new(vec![c, l], values).map_err(|e| CliError::model(&a.model, e))?;
    let stats = bench_latency(&model, &window, a.iters, a.warmup, a.with_preprocessing)
        .map_err(|e| CliError::model(&a.model, e))?;
    let _ = writeln!(out, "{}", stats.summary_line());
    Ok(())
}

fn info_cmd(a: InfoArgs, out: &mut dyn Write) -> CliResult {
    let model = open_model(&a.model)?;
    let bytes = std::fs::metadata(&a.model)
        .map_err(|e| CliError::model(&a.model, Error::io(&a.model, e)))?
        .len();
    let mut kv = KeyValues::new();
    model.config.write_kv(&mut kv);
    let mut s = String::new();
    writeln!(s, "file={}", a.model.display()).unwrap();
    for (k, v) in kv.iter() {
        writeln!(s, "{k}={v}").unwrap();
    }
    for (k, v) in &model.meta {
        writeln!(s, "meta.{k}={v}").unwrap();
    }
    let count = model.count_params();
    for (name, n) in &count.components {
        writeln!(s, "params.{name}={n}").unwrap();
    }
    writeln!(s, "total_parameters={}", count.total).unwrap();
    writeln!(s, "file_size_bytes={bytes}").unwrap();
    let _ = out.write_all(s.as_bytes());
    Ok(())
}

/// Parses the `key=value` lines printed by `info`.
pub fn parse_info(text: &str) -> crate::Result<KeyValues> {
    KeyValues::parse(text)
}
