//! `glai` command-line interface.
//!
//! Every subcommand reads its settings from flags and, optionally, a
//! `--config` file of `key = value` lines (flags win). Datasets are CSV
//! files with a header (label column `label` unless `label_column` says
//! otherwise) or IDX pairs written as `idx:<images>,<labels>`.

mod config;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{LayerSizes, Params, KNOWN_KEYS};

use crate::data::{self, load_csv, load_idx, synth_clusters, to_csv, write_atomic, Dataset};
use crate::error::{Error, Result};
use crate::estimator::{
    evaluate_estimator, federated_round, merge_estimators, Loss, Trainer, DEFAULT_RIDGE,
};
use crate::nn::{train_epochs, EpochRecord, Metrics, Network, NetworkSpec, TrainConfig};
use crate::paths::{init_estimator_with_cap, DEFAULT_PATH_CAP};
use crate::persist::{self, Artifact};
use crate::poc::{evaluate_masked, retrain_quantitative};
use crate::selector::{capture_patterns, convergence_trace, PatternSet};

pub const METRICS_HEADER: &str = "epoch,split,loss,accuracy,pattern_diff";
pub const SWEEP_HEADER: &str = "samples,added,method,loss,accuracy";

pub const DEFAULT_INITIAL_EPOCHS: usize = 200;
pub const DEFAULT_RETRAIN_EPOCHS: usize = 50;
const DEFAULT_LR: f64 = 0.05;
const DEFAULT_BATCH: usize = 32;

#[derive(Debug, Parser)]
#[command(name = "glai", version, about = "Structural/quantitative decoupled training for ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Gaussian-cluster dataset, split into train/val CSV files.
    GenData(GenDataArgs),
    /// Train a network and save selector (and estimator) copies.
    TrainInitial(TrainInitialArgs),
    /// Capture activation patterns of a dataset through a frozen network.
    CapturePatterns(CaptureArgs),
    /// Quantitative-only re-training of a masked network copy.
    RetrainPoc(RetrainPocArgs),
    /// Quantitative-only vs. traditional re-training over growing sample counts.
    RetrainSweep(SweepArgs),
    /// Per-epoch activation-pattern change alongside losses.
    PatternTrace(TraceArgs),
    /// Enumerate paths and initialize path weights from a network.
    BuildEstimator(BuildEstimatorArgs),
    /// Train path weights by SGD or a direct least-squares solve.
    TrainEstimator(TrainEstimatorArgs),
    /// Weighted average of two estimators.
    Merge(MergeArgs),
    /// One federated round over K in-process nodes.
    FederatedSim(FederatedArgs),
    /// Loss and accuracy of a saved model on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// `key = value` settings file; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub spread: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub out_train: Option<PathBuf>,
    #[arg(long)]
    pub out_val: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainInitialArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<LayerSizes>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<String>,
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub selector_out: Option<PathBuf>,
    #[arg(long)]
    pub estimator_out: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CaptureArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrainPocArgs {
    #[command(flatten)]
    pub common: Common,
    /// Network copy whose weights are re-trained.
    #[arg(long)]
    pub estimator: Option<PathBuf>,
    /// Frozen network that supplies activation patterns.
    #[arg(long)]
    pub selector: Option<PathBuf>,
    /// All n + m training samples.
    #[arg(long)]
    pub train: Option<String>,
    /// Pre-captured patterns for `train`; captured from the selector if absent.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also run traditional SGD from the same starting network.
    #[arg(long)]
    pub baseline: bool,
    #[arg(long)]
    pub baseline_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Phase-1 network, used both as frozen selector and as starting point.
    #[arg(long)]
    pub selector: Option<PathBuf>,
    /// Sample pool; the first `initial + added` rows are used per run.
    #[arg(long)]
    pub train: Option<String>,
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub initial: Option<usize>,
    #[arg(long)]
    pub increment: Option<usize>,
    #[arg(long)]
    pub max_extra: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub spec: Option<LayerSizes>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train: Option<String>,
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildEstimatorArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub max_paths: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Sgd,
    Direct,
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sgd" => Ok(Method::Sgd),
            "direct" => Ok(Method::Direct),
            other => Err(format!("unknown method `{other}` (sgd|direct)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LossArg {
    Cce,
    Mse,
}

impl std::str::FromStr for LossArg {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cce" => Ok(LossArg::Cce),
            "mse" => Ok(LossArg::Mse),
            other => Err(format!("unknown loss `{other}` (cce|mse)")),
        }
    }
}

impl From<LossArg> for Loss {
    fn from(l: LossArg) -> Loss {
        match l {
            LossArg::Cce => Loss::Cce,
            LossArg::Mse => Loss::Mse,
        }
    }
}

/// Settings shared by commands that train estimators.
#[derive(Debug, Args)]
pub struct TrainerArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub loss: Option<LossArg>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub ridge: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainEstimatorArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub trainer: TrainerArgs,
    /// Starting estimator (its path table is reused by the direct solver).
    #[arg(long)]
    pub estimator: Option<PathBuf>,
    #[arg(long)]
    pub selector: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<String>,
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Weight of `a`; `b` gets `1 - merge_alpha`.
    #[arg(long)]
    pub merge_alpha: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FederatedArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub trainer: TrainerArgs,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub estimator: Option<PathBuf>,
    #[arg(long)]
    pub selector: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<String>,
    #[arg(long)]
    pub val: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub label_column: Option<String>,
    /// Frozen network for patterns; required for estimators, turns a
    /// network into its masked (quantitative-only) evaluation.
    #[arg(long)]
    pub selector: Option<PathBuf>,
    #[arg(long)]
    pub patterns: Option<PathBuf>,
}

/// Runs the CLI with process arguments; returns the exit status.
pub fn main() -> i32 {
    if let Ok(n) = std::env::var("GLAI_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: GLAI_THREADS must be a positive integer, got `{n}`");
                return 2;
            }
        }
    }
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a),
        Command::TrainInitial(a) => train_initial(a),
        Command::CapturePatterns(a) => capture(a),
        Command::RetrainPoc(a) => retrain_poc(a),
        Command::RetrainSweep(a) => retrain_sweep(a),
        Command::PatternTrace(a) => pattern_trace(a),
        Command::BuildEstimator(a) => build_estimator(a),
        Command::TrainEstimator(a) => train_estimator(a),
        Command::Merge(a) => merge(a),
        Command::FederatedSim(a) => federated_sim(a),
        Command::Eval(a) => eval(a),
    }
}

/// `path.csv` or `idx:<images>,<labels>`.
pub fn load_dataset(source: &str, label_column: &str) -> Result<Dataset> {
    match source.strip_prefix("idx:") {
        Some(rest) => {
            let (images, labels) = rest
                .split_once(',')
                .ok_or_else(|| Error::Config(format!("IDX source `{source}` must be idx:<images>,<labels>")))?;
            load_idx(images, labels)
        }
        None => load_csv(source, label_column),
    }
}

fn dataset(params: &Params, flag: Option<String>, key: &str, label: &str) -> Result<Dataset> {
    load_dataset(&params.req::<String>(flag, key)?, label)
}

fn opt_dataset(params: &Params, flag: Option<String>, key: &str, label: &str) -> Result<Option<Dataset>> {
    params.pick::<String>(flag, key)?.map(|s| load_dataset(&s, label)).transpose()
}

fn label_column(params: &Params, flag: Option<String>) -> Result<String> {
    params.or(flag, "label_column", "label".to_string())
}

/// Rows of the per-epoch metrics CSV.
#[derive(Debug, Default)]
pub struct MetricsCsv {
    body: String,
}

impl MetricsCsv {
    pub fn row(&mut self, epoch: usize, split: &str, m: &Metrics, pattern_diff: Option<f64>) {
        let diff = pattern_diff.map(|d| d.to_string()).unwrap_or_default();
        self.body
            .push_str(&format!("{epoch},{split},{},{},{diff}\n", m.loss, m.accuracy));
    }

    pub fn history(&mut self, prefix: &str, history: &[EpochRecord]) {
        for r in history {
            self.row(r.epoch, &format!("{prefix}train"), &r.train, None);
            if let Some(v) = &r.val {
                self.row(r.epoch, &format!("{prefix}val"), v, None);
            }
        }
    }

    pub fn render(&self) -> String {
        format!("{METRICS_HEADER}\n{}", self.body)
    }

    fn save(&self, path: Option<&Path>) -> Result<()> {
        match path {
            Some(p) => write_atomic(p, self.render().as_bytes()),
            None => Ok(()),
        }
    }
}

fn train_config(params: &Params, epochs: Option<usize>, default_epochs: usize, lr: Option<f64>, batch: Option<usize>, seed: Option<u64>) -> Result<TrainConfig> {
    Ok(TrainConfig {
        epochs: params.or(epochs, "epochs", default_epochs)?,
        lr: params.or(lr, "lr", DEFAULT_LR)?,
        batch_size: params.or(batch, "batch", DEFAULT_BATCH)?,
        seed: params.or(seed, "seed", 0)?,
    })
}

fn gen_data(a: GenDataArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let data = synth_clusters(
        p.or(a.seed, "seed", 42)?,
        p.or(a.classes, "classes", 10)?,
        p.or(a.dims, "dims", 8)?,
        p.or(a.per_class, "per_class", 100)?,
        p.or(a.spread, "spread", 0.25)?,
    )?;
    let out_train: PathBuf = p.req(a.out_train, "out_train")?;
    let out_val: PathBuf = p.req(a.out_val, "out_val")?;
    let (train, val) = data::split(&data, p.or(a.train_fraction, "train_fraction", 0.8)?, p.or(a.seed, "seed", 42)?)?;
    write_atomic(&out_train, to_csv(&train).as_bytes())?;
    write_atomic(&out_val, to_csv(&val).as_bytes())?;
    println!("wrote {} train and {} val samples", train.len(), val.len());
    Ok(())
}

fn train_initial(a: TrainInitialArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let sizes: LayerSizes = p.req(a.spec, "spec")?;
    let cfg = train_config(&p, a.epochs, DEFAULT_INITIAL_EPOCHS, a.lr, a.batch, a.seed)?;
    let spec = NetworkSpec::new(sizes.0, cfg.seed)?;
    let train = dataset(&p, a.train, "train", &label)?;
    let val = opt_dataset(&p, a.val, "val", &label)?;
    let selector_out: PathBuf = p.req(a.selector_out, "selector_out")?;
    let estimator_out: Option<PathBuf> = p.pick(a.estimator_out, "estimator_out")?;
    let metrics: Option<PathBuf> = p.pick(a.metrics, "metrics")?;

    let (net, history) = train_epochs(&Network::init(&spec), &train, &cfg, val.as_ref())?;
    let mut csv = MetricsCsv::default();
    csv.history("", &history);

    persist::save_network(&net, &selector_out)?;
    if let Some(path) = estimator_out {
        persist::save_network(&net, path)?;
    }
    csv.save(metrics.as_deref())?;
    if let Some(last) = history.last() {
        println!("epoch {} train accuracy {:.4}", last.epoch, last.train.accuracy);
    }
    Ok(())
}

fn capture(a: CaptureArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let net = persist::load_network(p.req::<PathBuf>(a.model, "model")?)?;
    let data = dataset(&p, a.data, "data", &label)?;
    let out: PathBuf = p.req(a.out, "out")?;
    let ps = capture_patterns(&net, &data)?;
    persist::save_patterns(&ps, out)?;
    println!("captured {} patterns", ps.len());
    Ok(())
}

fn patterns_for(p: &Params, flag: Option<PathBuf>, selector: &Network, data: &Dataset) -> Result<PatternSet> {
    match p.pick::<PathBuf>(flag, "patterns")? {
        Some(path) => persist::load_patterns(path),
        None => capture_patterns(selector, data),
    }
}

fn retrain_poc(a: RetrainPocArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let est = persist::load_network(p.req::<PathBuf>(a.estimator, "estimator")?)?;
    let selector = persist::load_network(p.req::<PathBuf>(a.selector, "selector")?)?;
    let train = dataset(&p, a.train, "train", &label)?;
    let val = opt_dataset(&p, a.val, "val", &label)?;
    let cfg = train_config(&p, a.epochs, DEFAULT_RETRAIN_EPOCHS, a.lr, a.batch, a.seed)?;
    let baseline = p.switch(a.baseline, "baseline")?;
    let out: PathBuf = p.req(a.out, "out")?;
    let baseline_out: Option<PathBuf> = p.pick(a.baseline_out, "baseline_out")?;
    let metrics: Option<PathBuf> = p.pick(a.metrics, "metrics")?;

    let ps = patterns_for(&p, a.patterns, &selector, &train)?;
    let val_ps = val.as_ref().map(|v| capture_patterns(&selector, v)).transpose()?;
    let val_pair = val.as_ref().zip(val_ps.as_ref());
    let (trained, history) = retrain_quantitative(&est, &train, &ps, &cfg, val_pair)?;
    let mut csv = MetricsCsv::default();
    csv.history("", &history);

    let baseline_net = if baseline {
        let (net, hist) = train_epochs(&est, &train, &cfg, val.as_ref())?;
        csv.history("baseline_", &hist);
        Some(net)
    } else {
        None
    };

    persist::save_network(&trained, &out)?;
    if let (Some(net), Some(path)) = (&baseline_net, baseline_out) {
        persist::save_network(net, path)?;
    }
    csv.save(metrics.as_deref())?;
    if let (Some(v), Some(vps)) = (&val, &val_ps) {
        println!("quantitative-only val accuracy {:.4}", evaluate_masked(&trained, v, vps)?.accuracy);
        if let Some(net) = &baseline_net {
            println!("traditional val accuracy {:.4}", net.evaluate(v)?.accuracy);
        }
    }
    Ok(())
}

/// One row of a re-training sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub samples: usize,
    pub added: usize,
    pub quantitative: Metrics,
    pub traditional: Metrics,
}

/// For `added = increment, 2·increment, … ≤ max_extra`, re-trains the
/// Phase-1 network on the first `initial + added` pool samples both with
/// frozen patterns and traditionally, and reports validation metrics.
/// Patterns for earlier samples are reused; only new samples are captured.
pub fn run_sweep(
    selector: &Network,
    pool: &Dataset,
    val: &Dataset,
    initial: usize,
    increment: usize,
    max_extra: usize,
    cfg: &TrainConfig,
) -> Result<Vec<SweepPoint>> {
    if increment == 0 {
        return Err(Error::Config("increment must be >= 1".into()));
    }
    if initial + max_extra > pool.len() {
        return Err(Error::input(format!(
            "pool has {} samples, sweep needs {}",
            pool.len(),
            initial + max_extra
        )));
    }
    let frozen = crate::selector::PathSelector::new(selector.clone());
    let val_ps = frozen.capture(val)?;
    let mut ps = frozen.capture(&pool.head(initial))?;
    let mut points = Vec::new();
    let mut added = increment;
    while added <= max_extra {
        let n = initial + added;
        let fresh: Vec<usize> = (ps.len()..n).collect();
        ps = frozen.extend(&ps, &pool.subset(&fresh))?;
        let data = pool.head(n);
        let (q, _) = retrain_quantitative(selector, &data, &ps, cfg, None)?;
        let (t, _) = train_epochs(selector, &data, cfg, None)?;
        points.push(SweepPoint {
            samples: n,
            added,
            quantitative: evaluate_masked(&q, val, &val_ps)?,
            traditional: t.evaluate(val)?,
        });
        added += increment;
    }
    Ok(points)
}

fn retrain_sweep(a: SweepArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let selector = persist::load_network(p.req::<PathBuf>(a.selector, "selector")?)?;
    let pool = dataset(&p, a.train, "train", &label)?;
    let val = dataset(&p, a.val, "val", &label)?;
    let cfg = train_config(&p, a.epochs, DEFAULT_RETRAIN_EPOCHS, a.lr, a.batch, a.seed)?;
    let initial = p.or(a.initial, "initial", 1024)?;
    let increment = p.or(a.increment, "increment", 1024)?;
    let max_extra = p.or(a.max_extra, "max_extra", 8192)?;
    let metrics: PathBuf = p.req(a.metrics, "metrics")?;

    let points = run_sweep(&selector, &pool, &val, initial, increment, max_extra, &cfg)?;
    let mut out = format!("{SWEEP_HEADER}\n");
    for pt in &points {
        for (method, m) in [("quantitative", &pt.quantitative), ("traditional", &pt.traditional)] {
            out.push_str(&format!("{},{},{method},{},{}\n", pt.samples, pt.added, m.loss, m.accuracy));
        }
        println!(
            "n+m = {:>6}: quantitative {:.4}  traditional {:.4}",
            pt.samples, pt.quantitative.accuracy, pt.traditional.accuracy
        );
    }
    write_atomic(metrics, out.as_bytes())
}

fn pattern_trace(a: TraceArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let sizes: LayerSizes = p.req(a.spec, "spec")?;
    let cfg = train_config(&p, a.epochs, DEFAULT_RETRAIN_EPOCHS, a.lr, a.batch, a.seed)?;
    let spec = NetworkSpec::new(sizes.0, cfg.seed)?;
    let train = dataset(&p, a.train, "train", &label)?;
    let val = dataset(&p, a.val, "val", &label)?;
    let metrics: PathBuf = p.req(a.metrics, "metrics")?;

    let trace = convergence_trace(&spec, &train, &val, &cfg)?;
    let mut csv = MetricsCsv::default();
    for t in &trace {
        let tr = Metrics { loss: t.train_loss, accuracy: t.train_accuracy };
        let va = Metrics { loss: t.val_loss, accuracy: t.val_accuracy };
        csv.row(t.epoch, "train", &tr, None);
        csv.row(t.epoch, "val", &va, Some(t.diff));
    }
    write_atomic(metrics, csv.render().as_bytes())
}

fn build_estimator(a: BuildEstimatorArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let net = persist::load_network(p.req::<PathBuf>(a.model, "model")?)?;
    let cap = p.or(a.max_paths, "max_paths", DEFAULT_PATH_CAP)?;
    let out: PathBuf = p.req(a.out, "out")?;
    let est = init_estimator_with_cap(&net, cap)?;
    persist::save_estimator(&est, out)?;
    println!(
        "{} paths ({} full, {} bias)",
        est.table().len(),
        est.table().full_count(),
        est.table().bias_count()
    );
    Ok(())
}

fn trainer(p: &Params, t: TrainerArgs) -> Result<Trainer> {
    let method: Method = p.or(t.method, "method", Method::Sgd)?;
    Ok(match method {
        Method::Direct => Trainer::Direct {
            ridge: p.or(t.ridge, "ridge", DEFAULT_RIDGE)?,
        },
        Method::Sgd => Trainer::Sgd {
            config: train_config(p, t.epochs, DEFAULT_RETRAIN_EPOCHS, t.lr, t.batch, t.seed)?,
            loss: p.or(t.loss, "loss", LossArg::Cce)?.into(),
        },
    })
}

fn train_estimator(a: TrainEstimatorArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let est = persist::load_estimator(p.req::<PathBuf>(a.estimator, "estimator")?)?;
    let selector = persist::load_network(p.req::<PathBuf>(a.selector, "selector")?)?;
    let train = dataset(&p, a.train, "train", &label)?;
    let val = opt_dataset(&p, a.val, "val", &label)?;
    let out: PathBuf = p.req(a.out, "out")?;
    let metrics: Option<PathBuf> = p.pick(a.metrics, "metrics")?;
    let trainer = trainer(&p, a.trainer)?;

    let ps = patterns_for(&p, a.patterns, &selector, &train)?;
    let val_ps = val.as_ref().map(|v| capture_patterns(&selector, v)).transpose()?;
    let mut csv = MetricsCsv::default();
    let trained = match trainer {
        Trainer::Sgd { config, loss } => {
            let (e, hist) = crate::estimator::estimator_sgd_train(
                &est,
                &train,
                &ps,
                &config,
                loss,
                val.as_ref().zip(val_ps.as_ref()),
            )?;
            csv.history("", &hist);
            e
        }
        Trainer::Direct { .. } => {
            let e = trainer.train(&est, &train, &ps)?;
            csv.row(0, "train", &evaluate_estimator(&e, &train, &ps)?, None);
            if let (Some(v), Some(vps)) = (&val, &val_ps) {
                csv.row(0, "val", &evaluate_estimator(&e, v, vps)?, None);
            }
            e
        }
    };
    persist::save_estimator(&trained, out)?;
    csv.save(metrics.as_deref())?;
    if let (Some(v), Some(vps)) = (&val, &val_ps) {
        println!("val accuracy {:.4}", evaluate_estimator(&trained, v, vps)?.accuracy);
    }
    Ok(())
}

fn merge(a: MergeArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let ea = persist::load_estimator(p.req::<PathBuf>(a.a, "a")?)?;
    let eb = persist::load_estimator(p.req::<PathBuf>(a.b, "b")?)?;
    let alpha = p.or(a.merge_alpha, "merge_alpha", 0.5)?;
    let out: PathBuf = p.req(a.out, "out")?;
    persist::save_estimator(&merge_estimators(&ea, &eb, alpha)?, out)
}

/// Splits `data` into `k` contiguous, near-equal shards (the first
/// `len % k` shards get one extra sample).
pub fn shard(data: &Dataset, k: usize) -> Result<Vec<Dataset>> {
    if k == 0 {
        return Err(Error::Config("nodes must be >= 1".into()));
    }
    if data.len() < k {
        return Err(Error::input(format!("{} samples cannot fill {k} nodes", data.len())));
    }
    let (base, extra) = (data.len() / k, data.len() % k);
    let mut start = 0;
    Ok((0..k)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let idx: Vec<usize> = (start..start + len).collect();
            start += len;
            data.subset(&idx)
        })
        .collect())
}

fn federated_sim(a: FederatedArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let global = persist::load_estimator(p.req::<PathBuf>(a.estimator, "estimator")?)?;
    let selector = persist::load_network(p.req::<PathBuf>(a.selector, "selector")?)?;
    let train = dataset(&p, a.train, "train", &label)?;
    let val = opt_dataset(&p, a.val, "val", &label)?;
    let nodes = p.or(a.nodes, "nodes", 4)?;
    let out: PathBuf = p.req(a.out, "out")?;
    let trainer = trainer(&p, a.trainer)?;

    let shards = shard(&train, nodes)?
        .into_iter()
        .map(|d| {
            let ps = capture_patterns(&selector, &d)?;
            Ok((d, ps))
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = federated_round(&global, &shards, &trainer)?;
    persist::save_estimator(&merged, out)?;
    if let Some(v) = &val {
        let vps = capture_patterns(&selector, v)?;
        println!("federated ({nodes} nodes) val accuracy {:.4}", evaluate_estimator(&merged, v, &vps)?.accuracy);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let p = Params::load(a.common.config.as_deref())?;
    let label = label_column(&p, a.label_column)?;
    let model = persist::load(p.req::<PathBuf>(a.model, "model")?)?;
    let data = dataset(&p, a.data, "data", &label)?;
    let selector: Option<PathBuf> = p.pick(a.selector, "selector")?;
    let patterns: Option<PathBuf> = p.pick(a.patterns, "patterns")?;
    let ps = match (patterns, selector) {
        (Some(path), _) => Some(persist::load_patterns(path)?),
        (None, Some(path)) => Some(capture_patterns(&persist::load_network(path)?, &data)?),
        (None, None) => None,
    };
    let (kind, m) = match (&model, &ps) {
        (Artifact::Network(net), None) => ("network", net.evaluate(&data)?),
        (Artifact::Network(net), Some(ps)) => ("masked-network", evaluate_masked(net, &data, ps)?),
        (Artifact::Estimator(e), Some(ps)) => ("estimator", evaluate_estimator(e, &data, ps)?),
        (Artifact::Estimator(_), None) => {
            return Err(Error::Config("evaluating an estimator needs --selector or --patterns".into()))
        }
        (Artifact::Patterns(_), _) => return Err(Error::Config("a pattern set is not a model".into())),
    };
    println!("kind,samples,loss,accuracy");
    println!("{kind},{},{},{}", data.len(), m.loss, m.accuracy);
    Ok(())
}

