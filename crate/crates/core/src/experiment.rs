//! Seeded benchmark runs and parameter sweeps over synthetic or ingested data.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_reward, DatasetBundle, Instance, SplitSpec};
use crate::error::{Error, Result};
use crate::featurize::{synth_pool, SynthConfig, TruthLabels};
use crate::losses::{RewardLossConfig, ScoreKind};
use crate::metrics::{MetricsReport, METRIC_NAMES};
use crate::model::{ModelKind, ModelSpec};
use crate::trainer::{train, Method, TrainConfig, TrainOutcome};

/// Model architecture settings without the input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub init_scale: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self { kind: ModelKind::Linear, hidden_dim: 16, init_scale: 0.01 }
    }
}

impl ModelSettings {
    pub fn spec(&self, input_dim: usize, seed: u64) -> ModelSpec {
        ModelSpec { kind: self.kind, input_dim, hidden_dim: self.hidden_dim, init_scale: self.init_scale, seed }
    }
}

/// Data pool a benchmark draws from before the reward split.
#[derive(Debug, Clone)]
pub struct Pool {
    /// Crowd instances carrying both crowd and expert labels.
    pub crowd: Vec<Instance>,
    pub unlabeled: Vec<Instance>,
    pub eval: Vec<Instance>,
    pub truth: TruthLabels,
}

impl Pool {
    pub fn synthetic(config: &SynthConfig) -> Result<Self> {
        let p = synth_pool(config)?;
        Ok(Self { crowd: p.crowd, unlabeled: p.unlabeled, eval: p.eval, truth: p.truth })
    }

    /// Applies the imbalance target and reward split.
    pub fn bundle(&self, split: &SplitSpec) -> Result<DatasetBundle> {
        let (crowd, reward) = split_reward(&self.crowd, split)?;
        Ok(DatasetBundle { crowd, unlabeled: self.unlabeled.clone(), reward, eval: self.eval.clone() })
    }
}

/// Which quantity a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridAxis {
    /// Expert ratio of the reward split.
    Lambda,
    /// Crowd imbalance target (positives removed).
    Gamma,
    /// Crowd label noise (synthetic data only).
    Rho,
}

impl GridAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "lambda" => Some(GridAxis::Lambda),
            "gamma" => Some(GridAxis::Gamma),
            "rho" => Some(GridAxis::Rho),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GridAxis::Lambda => "lambda",
            GridAxis::Gamma => "gamma",
            GridAxis::Rho => "rho",
        }
    }
}

/// Everything needed to produce one dataset and train on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub synth: SynthConfig,
    pub expert_ratio: f64,
    pub imbalance_target: Option<f64>,
    pub merge_expert_into_crowd: bool,
    pub model: ModelSettings,
    pub train: TrainConfig,
}

impl Default for Benchmark {
    /// The desk-scale synthetic benchmark: overlapping classes, 20% crowd
    /// noise, 2:1 crowd imbalance and a 10:1 unlabeled pool.
    fn default() -> Self {
        let train = TrainConfig {
            reward_loss: RewardLossConfig { lambda: 0.0, score_kind: ScoreKind::Prob },
            ..TrainConfig::default()
        };
        Self {
            synth: SynthConfig { class_separation: 1.25, ..SynthConfig::default() },
            expert_ratio: 0.1,
            imbalance_target: None,
            merge_expert_into_crowd: false,
            model: ModelSettings::default(),
            train,
        }
    }
}

impl Benchmark {
    /// Copy with one grid coordinate applied.
    pub fn at(&self, axis: GridAxis, value: f64) -> Self {
        let mut b = self.clone();
        match axis {
            GridAxis::Lambda => b.expert_ratio = value,
            GridAxis::Gamma => b.imbalance_target = Some(value),
            GridAxis::Rho => b.synth.noise_ratio = value,
        }
        b
    }

    pub fn split(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            expert_ratio: self.expert_ratio,
            imbalance_target: self.imbalance_target,
            seed,
            merge_expert_into_crowd: self.merge_expert_into_crowd,
        }
    }

    /// Synthetic bundle for `seed` (data, split and training all keyed by it).
    pub fn synthetic_bundle(&self, seed: u64) -> Result<(DatasetBundle, TruthLabels)> {
        let pool = Pool::synthetic(&SynthConfig { seed, ..self.synth.clone() })?;
        Ok((pool.bundle(&self.split(seed))?, pool.truth))
    }

    pub fn run(&self, bundle: &DatasetBundle, method: Method, seed: u64) -> std::result::Result<TrainOutcome, crate::trainer::TrainFailure> {
        let dim = bundle.dim().ok_or(Error::EmptyDataset("bundle"))?;
        let spec = self.model.spec(dim, seed);
        let config = TrainConfig { method, seed, ..self.train.clone() };
        train(bundle, &spec, &config)
    }
}

/// One (method, grid value, seed) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub grid_value: f64,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub best_step: usize,
    pub steps_run: usize,
    pub migrated: usize,
    /// Fraction of migrated ids whose crowd label disagrees with the hidden truth.
    pub migration_precision: Option<f64>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub method: Method,
    pub grid_value: f64,
    pub seed: u64,
    pub error: String,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, std: var.sqrt(), count: values.len() })
    }
}

/// Fraction of `migrated` ids whose crowd label (in `before`) disagrees with the truth.
pub fn migration_precision(migrated: &[String], before: &DatasetBundle, truth: &TruthLabels) -> Option<f64> {
    if migrated.is_empty() {
        return None;
    }
    let crowd: BTreeMap<&str, &Instance> = before.crowd.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut wrong = 0usize;
    let mut known = 0usize;
    for id in migrated {
        if let (Some(inst), Some(t)) = (crowd.get(id.as_str()), truth.get(id)) {
            known += 1;
            wrong += usize::from(inst.crowd_label != Some(t));
        }
    }
    (known > 0).then(|| wrong as f64 / known as f64)
}

/// Source of per-seed datasets for a sweep.
pub enum DataSource<'a> {
    Synthetic,
    /// A fixed pool (e.g. ingested from files); the grid reshapes it per seed.
    Pool(&'a Pool),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
}

impl SweepResult {
    /// `(method, grid value, metric) -> aggregate over seeds`.
    pub fn aggregates(&self) -> Vec<(Method, f64, &'static str, Aggregate)> {
        let mut out = Vec::new();
        let mut keys: Vec<(Method, f64)> = Vec::new();
        for r in &self.runs {
            if !keys.iter().any(|&(m, g)| m == r.method && g == r.grid_value) {
                keys.push((r.method, r.grid_value));
            }
        }
        for (m, g) in keys {
            for metric in METRIC_NAMES {
                let vals: Vec<f64> = self
                    .runs
                    .iter()
                    .filter(|r| r.method == m && r.grid_value == g)
                    .filter_map(|r| r.report.get(metric))
                    .collect();
                if let Some(a) = Aggregate::of(&vals) {
                    out.push((m, g, metric, a));
                }
            }
        }
        out
    }

    pub fn mean(&self, method: Method, grid_value: f64, metric: &str) -> Option<f64> {
        let vals: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| r.method == method && r.grid_value == grid_value)
            .filter_map(|r| r.report.get(metric))
            .collect();
        Aggregate::of(&vals).map(|a| a.mean)
    }
}

/// Runs every `(grid value, seed, method)` combination.
///
/// Runs execute on the current rayon pool; results are collected in grid,
/// seed, method order so the output does not depend on the thread count.
pub fn run_sweep(
    base: &Benchmark,
    source: DataSource<'_>,
    axis: GridAxis,
    values: &[f64],
    seeds: &[u64],
    methods: &[Method],
) -> Result<SweepResult> {
    if axis == GridAxis::Rho && matches!(source, DataSource::Pool(_)) {
        return Err(Error::Config("the rho grid needs synthetic data".into()));
    }
    let mut jobs = Vec::new();
    for &v in values {
        for &s in seeds {
            jobs.push((v, s));
        }
    }
    let per_job: Vec<Vec<std::result::Result<RunRecord, RunFailure>>> = jobs
        .par_iter()
        .map(|&(value, seed)| {
            let bench = base.at(axis, value);
            let data = match &source {
                DataSource::Synthetic => bench.synthetic_bundle(seed),
                DataSource::Pool(p) => p.bundle(&bench.split(seed)).map(|b| (b, p.truth.clone())),
            };
            let (bundle, truth) = match data {
                Ok(d) => d,
                Err(e) => {
                    return methods
                        .iter()
                        .map(|&m| Err(RunFailure { method: m, grid_value: value, seed, error: e.to_string() }))
                        .collect();
                }
            };
            let fingerprint = crate::io::bundle_fingerprint(&bundle);
            methods
                .iter()
                .map(|&method| match bench.run(&bundle, method, seed) {
                    Ok(out) => Ok(RunRecord {
                        method,
                        grid_value: value,
                        seed,
                        dataset_fingerprint: fingerprint.clone(),
                        best_step: out.best_step,
                        steps_run: out.steps_run,
                        migrated: out.migrated.len(),
                        migration_precision: migration_precision(&out.migrated, &bundle, &truth),
                        report: out.report,
                    }),
                    Err(e) => Err(RunFailure { method, grid_value: value, seed, error: e.to_string() }),
                })
                .collect()
        })
        .collect();
    let mut result = SweepResult::default();
    for r in per_job.into_iter().flatten() {
        match r {
            Ok(rec) => result.runs.push(rec),
            Err(f) => result.failures.push(f),
        }
    }
    Ok(result)
}
