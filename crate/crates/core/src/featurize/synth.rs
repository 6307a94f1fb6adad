use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{split_reward, DatasetBundle, Instance, Label, SparseVec, SplitSpec};
use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Two-Gaussian benchmark with symmetric crowd-label noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_unlabeled_pos: usize,
    pub n_unlabeled_neg: usize,
    pub n_eval_pos: usize,
    pub n_eval_neg: usize,
    pub dim: usize,
    /// Distance between the two class means.
    pub class_separation: f64,
    /// Probability that a crowd label is flipped.
    pub noise_ratio: f64,
    /// Fraction of the crowd set copied into the reward set with expert labels.
    pub expert_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_pos: 1000,
            n_neg: 2000,
            n_unlabeled_pos: 2000,
            n_unlabeled_neg: 18000,
            n_eval_pos: 1000,
            n_eval_neg: 2000,
            dim: 50,
            class_separation: 2.0,
            noise_ratio: 0.2,
            expert_ratio: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("synthetic dim must be >= 1".into()));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::Config(format!("class_separation must be > 0, got {}", self.class_separation)));
        }
        if !(0.0..1.0).contains(&self.noise_ratio) {
            return Err(Error::Config(format!("noise_ratio must be in [0, 1), got {}", self.noise_ratio)));
        }
        if self.n_pos + self.n_neg == 0 {
            return Err(Error::Config("synthetic crowd set is empty".into()));
        }
        Ok(())
    }
}

/// Evaluation-only record of true labels for crowd and unlabeled instances.
///
/// The trainer never receives this; acceptance oracles use it to score
/// pseudo-labels and migration decisions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TruthLabels(BTreeMap<String, Label>);

impl TruthLabels {
    pub fn insert(&mut self, id: impl Into<String>, label: Label) {
        self.0.insert(id.into(), label);
    }

    pub fn get(&self, id: &str) -> Option<Label> {
        self.0.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Label)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Generated data before the reward split: crowd instances carry both labels.
#[derive(Debug, Clone)]
pub struct SynthPool {
    pub crowd: Vec<Instance>,
    pub unlabeled: Vec<Instance>,
    pub eval: Vec<Instance>,
    pub truth: TruthLabels,
}

#[derive(Clone, Copy)]
enum Role {
    Crowd,
    Unlabeled,
    Eval,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Crowd => 1,
            Role::Unlabeled => 2,
            Role::Eval => 3,
        }
    }

    fn prefix(self) -> &'static str {
        match self {
            Role::Crowd => "c",
            Role::Unlabeled => "u",
            Role::Eval => "v",
        }
    }
}

struct Generator<'a> {
    config: &'a SynthConfig,
    direction: Vec<f64>,
}

impl Generator<'_> {
    fn features(&self, role: Role, index: usize, label: Label) -> Result<SparseVec> {
        let mut rng = rng::indexed_stream(self.config.seed, tags::FEATURES ^ (role.tag() << 32), index as u64);
        let shift = if label.is_positive() { 0.5 } else { -0.5 } * self.config.class_separation;
        let dense: Vec<f64> = self
            .direction
            .iter()
            .map(|u| rng.sample::<f64, _>(StandardNormal) + shift * u)
            .collect();
        SparseVec::from_dense(&dense)
    }

    fn flip(&self, role: Role, index: usize) -> bool {
        let mut rng = rng::indexed_stream(self.config.seed, tags::FLIP ^ (role.tag() << 32), index as u64);
        rng.random::<f64>() < self.config.noise_ratio
    }
}

fn random_direction(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = rng::stream(seed, tags::DIRECTION);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Generates the crowd/unlabeled/eval pools. Positives come first in each role.
pub fn synth_pool(config: &SynthConfig) -> Result<SynthPool> {
    config.validate()?;
    let gen = Generator { config, direction: random_direction(config.seed, config.dim) };
    let label_at = |i: usize, n_pos: usize| Label::from_bool(i < n_pos);
    let mut truth = TruthLabels::default();

    let mut crowd = Vec::with_capacity(config.n_pos + config.n_neg);
    for i in 0..config.n_pos + config.n_neg {
        let y = label_at(i, config.n_pos);
        let crowd_label = if gen.flip(Role::Crowd, i) { y.flipped() } else { y };
        let id = format!("{}{i}", Role::Crowd.prefix());
        truth.insert(id.clone(), y);
        crowd.push(
            Instance::new(id, gen.features(Role::Crowd, i, y)?).with_crowd(crowd_label).with_expert(y),
        );
    }

    let mut unlabeled = Vec::with_capacity(config.n_unlabeled_pos + config.n_unlabeled_neg);
    for i in 0..config.n_unlabeled_pos + config.n_unlabeled_neg {
        let y = label_at(i, config.n_unlabeled_pos);
        let id = format!("{}{i}", Role::Unlabeled.prefix());
        truth.insert(id.clone(), y);
        unlabeled.push(Instance::new(id, gen.features(Role::Unlabeled, i, y)?));
    }

    let mut eval = Vec::with_capacity(config.n_eval_pos + config.n_eval_neg);
    for i in 0..config.n_eval_pos + config.n_eval_neg {
        let y = label_at(i, config.n_eval_pos);
        eval.push(
            Instance::new(format!("{}{i}", Role::Eval.prefix()), gen.features(Role::Eval, i, y)?).with_expert(y),
        );
    }
    Ok(SynthPool { crowd, unlabeled, eval, truth })
}

/// Generates a full bundle, splitting the reward set off the crowd pool.
pub fn synth_generate(config: &SynthConfig) -> Result<(DatasetBundle, TruthLabels)> {
    let pool = synth_pool(config)?;
    let (crowd, reward) = split_reward(&pool.crowd, &SplitSpec::new(config.expert_ratio, config.seed))?;
    Ok((DatasetBundle { crowd, unlabeled: pool.unlabeled, reward, eval: pool.eval }, pool.truth))
}

/// Fraction of crowd instances whose crowd label disagrees with the truth.
pub fn empirical_noise_ratio(crowd: &[Instance], truth: &TruthLabels) -> Option<f64> {
    let mut total = 0usize;
    let mut flipped = 0usize;
    for inst in crowd {
        if let (Some(c), Some(t)) = (inst.crowd_label, truth.get(&inst.id)) {
            total += 1;
            flipped += usize::from(c != t);
        }
    }
    (total > 0).then(|| flipped as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(noise: f64) -> SynthConfig {
        SynthConfig {
            n_pos: 40,
            n_neg: 80,
            n_unlabeled_pos: 10,
            n_unlabeled_neg: 50,
            n_eval_pos: 20,
            n_eval_neg: 40,
            dim: 5,
            noise_ratio: noise,
            expert_ratio: 0.2,
            ..Default::default()
        }
    }

    #[test]
    fn no_noise_means_agreement() {
        let pool = synth_pool(&small(0.0)).unwrap();
        assert!(pool.crowd.iter().all(|i| i.crowd_label == i.expert_label));
    }

    #[test]
    fn flip_count_for_tweet_sized_crowd() {
        let cfg = SynthConfig {
            n_pos: 1088,
            n_neg: 2210,
            n_unlabeled_pos: 0,
            n_unlabeled_neg: 0,
            n_eval_pos: 0,
            n_eval_neg: 0,
            noise_ratio: 0.2029,
            ..Default::default()
        };
        let pool = synth_pool(&cfg).unwrap();
        let flipped = pool.crowd.iter().filter(|i| i.crowd_label != i.expert_label).count();
        // expected 669.2, 3 sigma = 3 * sqrt(3298 * 0.2029 * 0.7971) = 69.2
        assert!((flipped as f64 - 669.2).abs() < 69.2, "{flipped}");
    }

    #[test]
    fn regeneration_is_bit_identical() {
        let a = synth_generate(&small(0.3)).unwrap();
        let b = synth_generate(&small(0.3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flips_keyed_by_index_only() {
        // changing the dimension changes features but not flip events
        let a = synth_pool(&small(0.3)).unwrap();
        let b = synth_pool(&SynthConfig { dim: 9, ..small(0.3) }).unwrap();
        let labels = |p: &SynthPool| p.crowd.iter().map(|i| i.crowd_label).collect::<Vec<_>>();
        assert_eq!(labels(&a), labels(&b));
    }

    #[test]
    fn bundle_shape() {
        let (bundle, truth) = synth_generate(&small(0.1)).unwrap();
        bundle.validate(true).unwrap();
        assert_eq!(bundle.crowd.len(), 120);
        assert_eq!(bundle.reward.len(), 24);
        assert_eq!(bundle.unlabeled.len(), 60);
        assert_eq!(bundle.eval.len(), 60);
        assert_eq!(truth.len(), 180);
        assert!(bundle.unlabeled.iter().all(|u| u.crowd_label.is_none() && u.expert_label.is_none()));
    }

    #[test]
    fn rejects_invalid_config() {
        assert!(synth_pool(&SynthConfig { noise_ratio: 1.0, ..small(0.0) }).is_err());
        assert!(synth_pool(&SynthConfig { class_separation: 0.0, ..small(0.0) }).is_err());
    }
}
