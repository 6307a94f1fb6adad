//! `reward-sgd` subcommands.
//!
//! A dataset directory holds one file per role: `crowd.tsv`, `unlabeled.tsv`,
//! `reward.tsv` and `eval.tsv` (see [`crate::io`] for the row format), plus an
//! optional `truth.tsv` of hidden labels. Exit codes: 0 success, 1 usage or
//! parse error, 2 training failure, 3 checkpoint version mismatch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};

use crate::data::{DatasetBundle, Instance, Label};
use crate::error::Error;
use crate::experiment::{run_sweep, DataSource, GridAxis, Pool};
use crate::featurize::{empirical_noise_ratio, TruthLabels};
use crate::io::{
    bundle_fingerprint, config_entries, history_csv, long_csv, parse_rows, read_checkpoint, read_truth, to_json,
    write_checkpoint, write_dataset, write_file, write_truth, Checkpoint, DatasetReader, RawRow, RunConfig,
    RunManifest, TrainReport,
};
use crate::metrics::evaluate;
use crate::trainer::{Method, TrainFailure};

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_TRAINING: u8 = 2;
pub const EXIT_CHECKPOINT: u8 = 3;

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "REWARD_SGD_THREADS";

#[derive(Debug, Parser)]
#[command(name = "reward-sgd", version, about = "Reward-set guided reweighting for noisy, imbalanced labels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Train one model and write checkpoint, history and report.
    Train(TrainArgs),
    /// Run every method over a grid of settings and seeds.
    Sweep(SweepArgs),
    /// Evaluate a checkpoint on an expert-labeled dataset file.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory with crowd/unlabeled/reward/eval files; synthetic data when omitted.
    #[arg(long)]
    pub dataset_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// Pool directory; crowd rows need expert labels or a truth.tsv entry.
    #[arg(long)]
    pub dataset_dir: Option<PathBuf>,
    /// `lambda|gamma|rho=v1,v2,...`
    #[arg(long, value_parser = parse_grid)]
    pub grid: (GridAxis, Vec<f64>),
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Restrict to one method (all three by default).
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Dataset file whose rows carry expert labels.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Also write `eval.json` here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (egal, supervised, uniform_ssl)"))
}

fn parse_grid(s: &str) -> Result<(GridAxis, Vec<f64>), String> {
    let (axis, values) = s.split_once('=').ok_or("expected axis=v1,v2,...")?;
    let axis = GridAxis::parse(axis).ok_or_else(|| format!("unknown grid axis `{axis}` (lambda, gamma, rho)"))?;
    let values = values
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad grid value `{v}`")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((axis, values))
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CheckpointVersion { .. } => EXIT_CHECKPOINT,
            _ => EXIT_USAGE,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<TrainFailure> for CliError {
    fn from(e: TrainFailure) -> Self {
        Self { code: EXIT_TRAINING, message: e.to_string() }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Eval(a) => cmd_eval(&a),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source }.into())
}

fn count_labels(instances: &[Instance], pick: impl Fn(&Instance) -> Option<Label>) -> (usize, usize) {
    let pos = instances.iter().filter(|i| pick(i) == Some(Label::Positive)).count();
    (instances.len() - pos, pos)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let config = load_config(args.common.config.as_deref())?;
    let seed = args.seed.unwrap_or(config.seed);
    let (bundle, truth) = config.benchmark.synthetic_bundle(seed)?;
    let dir = &args.common.out_dir;
    ensure_dir(dir)?;
    write_dataset(&dir.join("crowd.tsv"), &bundle.crowd)?;
    write_dataset(&dir.join("unlabeled.tsv"), &bundle.unlabeled)?;
    write_dataset(&dir.join("reward.tsv"), &bundle.reward)?;
    write_dataset(&dir.join("eval.tsv"), &bundle.eval)?;
    write_truth(&dir.join("truth.tsv"), &truth)?;

    let (cn, cp) = count_labels(&bundle.crowd, |i| i.crowd_label);
    let (rn, rp) = count_labels(&bundle.reward, |i| i.expert_label);
    let (en, ep) = count_labels(&bundle.eval, |i| i.expert_label);
    let summary = serde_json::json!({
        "seed": seed,
        "dataset_fingerprint": bundle_fingerprint(&bundle),
        "crowd": { "rows": bundle.crowd.len(), "negative": cn, "positive": cp },
        "unlabeled": { "rows": bundle.unlabeled.len() },
        "reward": { "rows": bundle.reward.len(), "negative": rn, "positive": rp },
        "eval": { "rows": bundle.eval.len(), "negative": en, "positive": ep },
        "noise_ratio": empirical_noise_ratio(&bundle.crowd, &truth),
        "config": config_entries(config.entries()),
    });
    let text = to_json(&summary);
    write_file(&dir.join("summary.json"), text.as_bytes())?;
    print!("{text}");
    Ok(())
}

fn read_rows(path: &Path, required: bool) -> CliResult<Vec<RawRow>> {
    if !required && !path.exists() {
        return Ok(Vec::new());
    }
    let name = path.display().to_string();
    Ok(parse_rows(&crate::io::read_file(path)?, &name)?)
}

/// Files of a dataset directory, featurized to one dimension.
pub struct LoadedDir {
    pub crowd: Vec<Instance>,
    pub unlabeled: Vec<Instance>,
    pub reward: Vec<Instance>,
    pub eval: Vec<Instance>,
    pub truth: Option<TruthLabels>,
    /// Present when any row was text.
    pub featurizer: Option<crate::featurize::HashFeaturizerConfig>,
}

pub fn load_dataset_dir(dir: &Path, config: &RunConfig) -> CliResult<LoadedDir> {
    let files = [("crowd.tsv", true), ("unlabeled.tsv", false), ("reward.tsv", false), ("eval.tsv", true)];
    let mut rows = Vec::new();
    for (name, required) in files {
        rows.push((dir.join(name), read_rows(&dir.join(name), required)?));
    }
    let has_text = rows.iter().flat_map(|(_, r)| r).any(|r| matches!(r.payload, crate::io::Payload::Text(_)));
    let dim = DatasetReader::infer_dim(rows.iter().flat_map(|(_, r)| r), config.input_dim, &config.featurizer)?;
    let reader = DatasetReader { dim, featurizer: config.featurizer.clone() };
    let mut sets = Vec::new();
    for (path, r) in rows {
        sets.push(reader.instances(r, &path.display().to_string())?);
    }
    let truth_path = dir.join("truth.tsv");
    let truth = if truth_path.exists() { Some(read_truth(&truth_path)?) } else { None };
    let mut it = sets.into_iter();
    Ok(LoadedDir {
        crowd: it.next().unwrap_or_default(),
        unlabeled: it.next().unwrap_or_default(),
        reward: it.next().unwrap_or_default(),
        eval: it.next().unwrap_or_default(),
        truth,
        featurizer: has_text.then(|| config.featurizer.clone()),
    })
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let mut config = load_config(args.common.config.as_deref())?;
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if let Some(m) = args.method {
        config.benchmark.train.method = m;
    }
    let seed = config.seed;
    let (bundle, featurizer) = match &args.dataset_dir {
        Some(dir) => {
            let d = load_dataset_dir(dir, &config)?;
            (DatasetBundle { crowd: d.crowd, unlabeled: d.unlabeled, reward: d.reward, eval: d.eval }, d.featurizer)
        }
        None => (config.benchmark.synthetic_bundle(seed)?.0, None),
    };
    let dim = bundle.dim().ok_or(Error::EmptyDataset("crowd set"))?;
    let spec = config.benchmark.model.spec(dim, seed);
    let method = config.benchmark.train.method;
    let outcome = config.benchmark.run(&bundle, method, seed)?;

    let dir = &args.common.out_dir;
    ensure_dir(dir)?;
    write_checkpoint(&dir.join("checkpoint.txt"), &Checkpoint { spec, featurizer, params: outcome.params.clone() })?;
    write_file(&dir.join("history.csv"), history_csv(&outcome.history).as_bytes())?;
    let report = TrainReport {
        method,
        seed,
        dataset_fingerprint: bundle_fingerprint(&bundle),
        best_step: outcome.best_step,
        steps_run: outcome.steps_run,
        migrated: outcome.migrated.clone(),
        report: outcome.report.clone(),
        config: config_entries(config.entries()),
    };
    let text = to_json(&report);
    write_file(&dir.join("report.json"), text.as_bytes())?;
    print!("{}", to_json(&outcome.report));
    Ok(())
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError { code: EXIT_USAGE, message: format!("{THREADS_ENV} must be a positive integer, got `{v}`") })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError { code: EXIT_USAGE, message: format!("thread pool: {e}") })
}

fn pool_from_dir(dir: &Path, config: &RunConfig) -> CliResult<Pool> {
    let d = load_dataset_dir(dir, config)?;
    let truth = d.truth.unwrap_or_default();
    let crowd = d
        .crowd
        .into_iter()
        .map(|mut i| {
            if i.expert_label.is_none() {
                i.expert_label = truth.get(&i.id);
            }
            i
        })
        .collect();
    Ok(Pool { crowd, unlabeled: d.unlabeled, eval: d.eval, truth })
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let config = load_config(args.common.config.as_deref())?;
    let seeds = args.seeds.clone().unwrap_or_else(|| config.seeds.clone());
    if seeds.is_empty() {
        return Err(CliError { code: EXIT_USAGE, message: "no seeds given".into() });
    }
    let (axis, grid) = &args.grid;
    if grid.is_empty() {
        return Err(CliError { code: EXIT_USAGE, message: "empty grid".into() });
    }
    let methods: Vec<Method> = args.method.map_or_else(|| Method::ALL.to_vec(), |m| vec![m]);
    let pool = args.dataset_dir.as_deref().map(|d| pool_from_dir(d, &config)).transpose()?;
    let source = pool.as_ref().map_or(DataSource::Synthetic, DataSource::Pool);
    let result = thread_pool()?.install(|| run_sweep(&config.benchmark, source, *axis, grid, &seeds, &methods))?;

    let ok = result.runs.len();
    let failed = result.failures.len();
    for f in &result.failures {
        log::warn!("{} at {}={} seed {} failed: {}", f.method, axis.name(), f.grid_value, f.seed, f.error);
    }
    let dir = &args.common.out_dir;
    ensure_dir(dir)?;
    write_file(&dir.join("results.csv"), long_csv(&result.runs).as_bytes())?;
    let manifest = RunManifest::new(axis.name(), grid, &seeds, &methods, config_entries(config.entries()), result);
    write_file(&dir.join("manifest.json"), to_json(&manifest).as_bytes())?;
    let log_text = format!(
        "started_unix={:.3}\nfinished_unix={:.3}\nelapsed_seconds={:.3}\nruns_ok={ok}\nruns_failed={failed}\n",
        unix_seconds(started),
        unix_seconds(SystemTime::now()),
        clock.elapsed().as_secs_f64()
    );
    write_file(&dir.join("run.log"), log_text.as_bytes())?;
    println!("{ok} runs succeeded, {failed} failed");
    if ok == 0 {
        return Err(CliError { code: EXIT_TRAINING, message: "every run failed".into() });
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    let checkpoint = read_checkpoint(&args.checkpoint)?;
    let name = args.dataset.display().to_string();
    let rows = parse_rows(&crate::io::read_file(&args.dataset)?, &name)?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset("evaluation file").into());
    }
    let reader = DatasetReader {
        dim: checkpoint.spec.input_dim,
        featurizer: checkpoint.featurizer.clone().unwrap_or_default(),
    };
    let instances = reader.instances(rows, &name)?;
    let report = evaluate(&checkpoint.spec, &checkpoint.params, &instances, 0.5)?;
    let text = to_json(&report);
    if let Some(dir) = &args.out_dir {
        ensure_dir(dir)?;
        write_file(&dir.join("eval.json"), text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}
