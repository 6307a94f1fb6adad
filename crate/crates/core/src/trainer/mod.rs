//! Training loop: batch sampling, reweighted steps, evaluation, early
//! stopping and label migration, plus the two baselines.

mod migration;
mod sampler;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use migration::{migrate_false_labeled, EncounterLog, MigrationOutcome, MigrationPolicy};
pub use sampler::{EpochSampler, StratifiedSampler};

use crate::data::{DatasetBundle, Instance, Label, LabelSource};
use crate::error::{Error, Result};
use crate::losses::{reward_loss, LabeledRef, PseudoLabelConfig, RewardLossConfig};
use crate::metrics::{evaluate, evaluate_with, MetricsReport};
use crate::model::{ModelSpec, ParamVector};
use crate::reweight::{meta_step, MetaStepConfig, UnlabeledRef, Weighting};
use crate::rng::tags;

/// Training procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Reward-guided reweighting of labeled and pseudo-labeled samples.
    Egal,
    /// Plain SGD on crowd labels only.
    Supervised,
    /// Labeled plus pseudo-labeled loss with fixed `1/n`, `1/m` weights.
    UniformSsl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Egal, Method::Supervised, Method::UniformSsl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Egal => "egal",
            Method::Supervised => "supervised",
            Method::UniformSsl => "uniform_ssl",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSizes {
    pub labeled: usize,
    pub unlabeled: usize,
    pub reward: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_steps: usize,
    pub eval_every: usize,
    pub batch: BatchSizes,
    pub alpha: f64,
    pub beta: f64,
    pub reward_loss: RewardLossConfig,
    pub pseudo: PseudoLabelConfig,
    /// Evaluations without reward-set bACC improvement before stopping; `None` disables.
    pub patience: Option<usize>,
    pub migration: MigrationPolicy,
    pub seed: u64,
    pub method: Method,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            total_steps: 10_000,
            eval_every: 512,
            batch: BatchSizes { labeled: 64, unlabeled: 32, reward: 32 },
            alpha: 0.03,
            beta: 1.0,
            reward_loss: RewardLossConfig::default(),
            pseudo: PseudoLabelConfig::default(),
            patience: Some(10),
            migration: MigrationPolicy::default(),
            seed: 0,
            method: Method::Egal,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }
        if self.batch.labeled == 0 {
            return Err(Error::Config("labeled batch size must be >= 1".into()));
        }
        if self.method == Method::Egal && self.batch.reward < 2 {
            return Err(Error::Config("reward batch size must be >= 2".into()));
        }
        if self.migration.window == 0 {
            return Err(Error::Config("migration window must be >= 1".into()));
        }
        self.step_config().validate()
    }

    /// Per-step settings implied by the method.
    pub fn step_config(&self) -> MetaStepConfig {
        MetaStepConfig {
            alpha: self.alpha,
            beta: if self.method == Method::Supervised { 0.0 } else { self.beta },
            reward_loss: self.reward_loss,
            pseudo: self.pseudo,
            weighting: if self.method == Method::Egal { Weighting::Meta } else { Weighting::Uniform },
        }
    }
}

/// One evaluation boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: usize,
    /// Reward loss over the whole reward set, when it holds both classes.
    pub reward_loss: Option<f64>,
    pub reward_bacc: Option<f64>,
    pub eval: MetricsReport,
    /// Labeled samples that received weight zero since the previous boundary.
    pub zero_weight_count: usize,
    pub migrated: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EvalRecord>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best checkpoint by eval bACC (earliest on ties); the initial
    /// parameters when no evaluation ran.
    pub params: ParamVector,
    pub best_step: usize,
    pub report: MetricsReport,
    pub history: TrainHistory,
    pub steps_run: usize,
    pub migrated: Vec<String>,
    /// Data after migration.
    pub bundle: DatasetBundle,
}

/// Training aborted; carries the last finite parameters and the history so far.
#[derive(Debug, Error)]
#[error("training failed{}: {source}", .step.map(|s| format!(" at step {s}")).unwrap_or_default())]
pub struct TrainFailure {
    #[source]
    pub source: Error,
    pub step: Option<usize>,
    pub last_good: Option<ParamVector>,
    pub history: TrainHistory,
}

impl From<Error> for TrainFailure {
    fn from(source: Error) -> Self {
        Self { source, step: None, last_good: None, history: TrainHistory::default() }
    }
}

fn selection_score(report: &MetricsReport) -> f64 {
    report.bacc.unwrap_or(report.accuracy)
}

fn labeled_refs<'a>(data: &'a [Instance], idx: &[usize], source: LabelSource) -> Result<Vec<LabeledRef<'a>>> {
    idx.iter()
        .map(|&i| {
            let inst = &data[i];
            Ok(LabeledRef { id: &inst.id, x: &inst.features, y: inst.require_label(source)? })
        })
        .collect()
}

struct Samplers {
    crowd: EpochSampler,
    unlabeled: Option<EpochSampler>,
    reward: Option<StratifiedSampler>,
}

impl Samplers {
    fn new(bundle: &DatasetBundle, seed: u64, epoch: u64, with_reward: bool) -> Result<Self> {
        let tag = tags::SAMPLER ^ (epoch << 8);
        let reward = if with_reward {
            let pos: Vec<bool> = bundle.reward.iter().map(|r| r.expert_label == Some(Label::Positive)).collect();
            Some(StratifiedSampler::new(&pos, seed, tag ^ 3)?)
        } else {
            None
        };
        Ok(Self {
            crowd: EpochSampler::new(bundle.crowd.len(), seed, tag ^ 1),
            unlabeled: (!bundle.unlabeled.is_empty()).then(|| EpochSampler::new(bundle.unlabeled.len(), seed, tag ^ 2)),
            reward,
        })
    }
}

fn reward_has_both_classes(reward: &[Instance]) -> bool {
    let pos = reward.iter().filter(|r| r.expert_label == Some(Label::Positive)).count();
    pos > 0 && pos < reward.len()
}

/// Runs the configured method for up to `total_steps` steps.
pub fn train(bundle: &DatasetBundle, spec: &ModelSpec, config: &TrainConfig) -> std::result::Result<TrainOutcome, TrainFailure> {
    config.validate()?;
    spec.validate()?;
    let uses_reward = config.method == Method::Egal;
    bundle.validate(uses_reward)?;
    if bundle.eval.is_empty() {
        return Err(Error::EmptyDataset("eval set").into());
    }
    if let Some(dim) = bundle.dim() {
        if dim != spec.input_dim {
            return Err(Error::DimensionMismatch { expected: spec.input_dim, got: dim }.into());
        }
    }

    let mut data = bundle.clone();
    let step_cfg = config.step_config();
    let uses_unlabeled = config.method != Method::Supervised && config.batch.unlabeled > 0;
    let monitor_reward = reward_has_both_classes(&data.reward);
    let migrate = config.migration.enabled && config.method == Method::Egal;

    let mut params = spec.init()?;
    let mut best = (params.clone(), 0usize, evaluate(spec, &params, &data.eval, 0.5)?);
    let mut best_selection: Option<f64> = None;
    let mut best_reward_bacc: Option<f64> = None;
    let mut stale = 0usize;
    let mut history = TrainHistory::default();
    let mut log = EncounterLog::new(config.migration.window);
    let mut samplers = Samplers::new(&data, config.seed, 0, uses_reward)?;
    let mut zero_weight_count = 0usize;
    let mut all_migrated = Vec::new();
    let mut steps_run = 0;

    let fail = |source: Error, step: usize, last: &ParamVector, history: &TrainHistory| TrainFailure {
        source,
        step: Some(step),
        last_good: Some(last.clone()),
        history: history.clone(),
    };

    for step in 0..config.total_steps {
        let labeled_idx = samplers.crowd.next_batch(config.batch.labeled).map_err(|e| fail(e, step, &params, &history))?;
        let labeled = labeled_refs(&data.crowd, &labeled_idx, LabelSource::Crowd).map_err(|e| fail(e, step, &params, &history))?;
        let unlabeled_idx = match (&mut samplers.unlabeled, uses_unlabeled) {
            (Some(s), true) => s.next_batch(config.batch.unlabeled).map_err(|e| fail(e, step, &params, &history))?,
            _ => Vec::new(),
        };
        let unlabeled: Vec<UnlabeledRef> = unlabeled_idx
            .iter()
            .map(|&i| UnlabeledRef { id: &data.unlabeled[i].id, x: &data.unlabeled[i].features })
            .collect();
        let reward = match &mut samplers.reward {
            Some(s) => {
                let idx = s.next_batch(config.batch.reward).map_err(|e| fail(e, step, &params, &history))?;
                labeled_refs(&data.reward, &idx, LabelSource::Expert).map_err(|e| fail(e, step, &params, &history))?
            }
            None => Vec::new(),
        };

        let out = meta_step(spec, &params, &labeled, &unlabeled, &reward, &step_cfg, step)
            .map_err(|e| fail(e, step, &params, &history))?;
        if let Some(bad) = out.diagnostics.sup_losses.iter().chain(&out.diagnostics.unsup_losses).find(|l| !l.is_finite()) {
            return Err(fail(Error::NonFiniteLoss { score: *bad }, step, &params, &history));
        }
        zero_weight_count += out.diagnostics.zero_weight_labeled.len();
        if migrate {
            for (r, &raw) in labeled.iter().zip(&out.weights.raw) {
                log.record(r.id, raw);
            }
        }
        params = out.params;
        steps_run = step + 1;

        if steps_run % config.eval_every != 0 {
            continue;
        }
        let eval = evaluate(spec, &params, &data.eval, 0.5).map_err(|e| fail(e, step, &params, &history))?;
        let (reward_loss_val, reward_bacc) = if monitor_reward {
            let refs = labeled_refs(&data.reward, &(0..data.reward.len()).collect::<Vec<_>>(), LabelSource::Expert)
                .map_err(|e| fail(e, step, &params, &history))?;
            let l = reward_loss(spec, &params, &refs, &config.reward_loss).map_err(|e| fail(e, step, &params, &history))?;
            let m = evaluate_with(spec, &params, &data.reward, 0.5, LabelSource::Expert)
                .map_err(|e| fail(e, step, &params, &history))?;
            (Some(l), m.bacc)
        } else {
            (None, None)
        };

        let score = selection_score(&eval);
        if best_selection.is_none_or(|b| score > b) {
            best_selection = Some(score);
            best = (params.clone(), steps_run, eval.clone());
        }

        let migrated = if migrate {
            let outcome = migrate_false_labeled(&mut log, &config.migration, &mut data);
            if !outcome.migrated.is_empty() {
                samplers = Samplers::new(&data, config.seed, steps_run as u64, uses_reward)
                    .map_err(|e| fail(e, step, &params, &history))?;
            }
            outcome.migrated
        } else {
            Vec::new()
        };
        all_migrated.extend(migrated.iter().cloned());

        history.records.push(EvalRecord {
            step: steps_run,
            reward_loss: reward_loss_val,
            reward_bacc,
            eval,
            zero_weight_count,
            migrated,
        });
        zero_weight_count = 0;

        if let (Some(patience), Some(rb)) = (config.patience, reward_bacc) {
            if best_reward_bacc.is_none_or(|b| rb > b) {
                best_reward_bacc = Some(rb);
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    log::info!("early stop at step {steps_run}: reward bACC flat for {patience} evaluations");
                    break;
                }
            }
        }
    }

    let (params, best_step, report) = best;
    Ok(TrainOutcome { params, best_step, report, history, steps_run, migrated: all_migrated, bundle: data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurize::{synth_generate, SynthConfig};

    fn tiny() -> DatasetBundle {
        let cfg = SynthConfig {
            n_pos: 60,
            n_neg: 120,
            n_unlabeled_pos: 20,
            n_unlabeled_neg: 100,
            n_eval_pos: 50,
            n_eval_neg: 100,
            dim: 6,
            class_separation: 4.0,
            noise_ratio: 0.0,
            expert_ratio: 0.2,
            seed: 1,
        };
        synth_generate(&cfg).unwrap().0
    }

    fn cfg(method: Method) -> TrainConfig {
        TrainConfig {
            total_steps: 300,
            eval_every: 50,
            batch: BatchSizes { labeled: 16, unlabeled: 16, reward: 8 },
            patience: None,
            method,
            ..Default::default()
        }
    }

    #[test]
    fn history_length_without_patience() {
        let out = train(&tiny(), &ModelSpec::linear(6), &cfg(Method::Egal)).unwrap();
        assert_eq!(out.history.records.len(), 6);
        assert!(out.history.records.windows(2).all(|w| w[0].step < w[1].step));
        assert_eq!(out.steps_run, 300);
    }

    #[test]
    fn deterministic() {
        for m in Method::ALL {
            let a = train(&tiny(), &ModelSpec::linear(6), &cfg(m)).unwrap();
            let b = train(&tiny(), &ModelSpec::linear(6), &cfg(m)).unwrap();
            assert_eq!(a.history, b.history);
            assert_eq!(a.params, b.params);
        }
    }

    #[test]
    fn zero_steps_returns_initial_model() {
        let c = TrainConfig { total_steps: 0, ..cfg(Method::Supervised) };
        let spec = ModelSpec::linear(6);
        let out = train(&tiny(), &spec, &c).unwrap();
        assert_eq!(out.params, spec.init().unwrap());
        assert_eq!(out.best_step, 0);
        assert!(out.history.records.is_empty());
    }

    #[test]
    fn early_stop_honors_patience() {
        let c = TrainConfig { total_steps: 5000, eval_every: 10, patience: Some(2), ..cfg(Method::Egal) };
        let out = train(&tiny(), &ModelSpec::linear(6), &c).unwrap();
        assert!(out.steps_run < 5000);
    }

    #[test]
    fn supervised_allows_missing_reward() {
        let mut b = tiny();
        b.reward.clear();
        b.unlabeled.clear();
        assert!(train(&b, &ModelSpec::linear(6), &cfg(Method::Supervised)).is_ok());
        assert!(train(&b, &ModelSpec::linear(6), &cfg(Method::Egal)).is_err());
    }

    #[test]
    fn divergence_reports_last_good() {
        let mut b = tiny();
        for inst in b.crowd.iter_mut().chain(&mut b.eval).chain(&mut b.reward).chain(&mut b.unlabeled) {
            let scaled: Vec<f64> = inst.features.values().iter().map(|v| v * 1e200).collect();
            inst.features = crate::data::SparseVec::from_dense(&scaled).unwrap();
        }
        let c = TrainConfig { alpha: 1e200, ..cfg(Method::Supervised) };
        let err = train(&b, &ModelSpec::linear(6), &c).unwrap_err();
        assert!(matches!(err.source, Error::NonFiniteUpdate { .. } | Error::NonFiniteLoss { .. }));
        assert!(err.last_good.unwrap().is_finite());
    }
}
