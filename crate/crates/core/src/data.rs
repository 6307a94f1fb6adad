//! Instances, dataset bundles and the split/imbalance protocol.

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Binary label. `Positive` (1) is the relevant class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    pub fn from_bool(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::Negative),
            1 => Some(Label::Positive),
            _ => None,
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Negative => 0,
            Label::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn flipped(self) -> Self {
        match self {
            Label::Negative => Label::Positive,
            Label::Positive => Label::Negative,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// Sparse real vector of fixed dimension with strictly increasing indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    dim: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn new(dim: usize, indices: Vec<u32>, values: Vec<f64>) -> Result<Self> {
        if indices.len() != values.len() {
            return Err(Error::InvalidSparse(format!(
                "{} indices but {} values",
                indices.len(),
                values.len()
            )));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidSparse(format!(
                    "indices not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::InvalidSparse(format!("index {last} out of range for dimension {dim}")));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSparse(format!("non-finite value {v}")));
        }
        Ok(Self { dim, indices, values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, indices: Vec::new(), values: Vec::new() }
    }

    /// Builds a sparse vector holding every entry of `dense`, zeros included.
    pub fn from_dense(dense: &[f64]) -> Result<Self> {
        Self::new(dense.len(), (0..dense.len() as u32).collect(), dense.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().map(|&i| i as usize).zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }
}

/// One example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub features: SparseVec,
    pub crowd_label: Option<Label>,
    pub expert_label: Option<Label>,
    pub raw_text: Option<String>,
}

impl Instance {
    pub fn new(id: impl Into<String>, features: SparseVec) -> Self {
        Self { id: id.into(), features, crowd_label: None, expert_label: None, raw_text: None }
    }

    pub fn with_crowd(mut self, label: Label) -> Self {
        self.crowd_label = Some(label);
        self
    }

    pub fn with_expert(mut self, label: Label) -> Self {
        self.expert_label = Some(label);
        self
    }

    pub fn label(&self, source: LabelSource) -> Option<Label> {
        match source {
            LabelSource::Crowd => self.crowd_label,
            LabelSource::Expert => self.expert_label,
        }
    }

    pub fn require_label(&self, source: LabelSource) -> Result<Label> {
        self.label(source).ok_or_else(|| Error::MissingLabel { id: self.id.clone(), which: source.name() })
    }
}

/// Which annotation to read from an instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Crowd,
    Expert,
}

impl LabelSource {
    pub fn name(self) -> &'static str {
        match self {
            LabelSource::Crowd => "crowd",
            LabelSource::Expert => "expert",
        }
    }
}

/// Crowd-labeled set, unlabeled pool, expert reward set and held-out eval set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub crowd: Vec<Instance>,
    pub unlabeled: Vec<Instance>,
    pub reward: Vec<Instance>,
    pub eval: Vec<Instance>,
}

impl DatasetBundle {
    /// Input dimension shared by every instance, if the bundle is non-empty.
    pub fn dim(&self) -> Option<usize> {
        self.all().next().map(|i| i.features.dim())
    }

    fn all(&self) -> impl Iterator<Item = &Instance> {
        self.crowd.iter().chain(&self.unlabeled).chain(&self.reward).chain(&self.eval)
    }

    /// Checks label presence, dimensions and id disjointness.
    ///
    /// When `require_reward` is set the reward set must hold at least two
    /// instances covering both classes and be a subset of the crowd set.
    pub fn validate(&self, require_reward: bool) -> Result<()> {
        if self.crowd.is_empty() {
            return Err(Error::EmptyDataset("crowd set"));
        }
        let dim = self.crowd[0].features.dim();
        if let Some(bad) = self.all().find(|i| i.features.dim() != dim) {
            return Err(Error::Dataset(format!(
                "instance `{}` has dimension {} but the bundle uses {dim}",
                bad.id,
                bad.features.dim()
            )));
        }
        for inst in &self.crowd {
            inst.require_label(LabelSource::Crowd)?;
        }
        for inst in self.reward.iter().chain(&self.eval) {
            inst.require_label(LabelSource::Expert)?;
        }
        if let Some(inst) = self.unlabeled.iter().find(|i| i.crowd_label.is_some() || i.expert_label.is_some()) {
            return Err(Error::Dataset(format!("unlabeled instance `{}` carries a label", inst.id)));
        }
        let mut train_ids = BTreeSet::new();
        for inst in self.crowd.iter().chain(&self.unlabeled) {
            if !train_ids.insert(inst.id.as_str()) {
                return Err(Error::Dataset(format!("duplicate id `{}` across crowd/unlabeled", inst.id)));
            }
        }
        let crowd_ids: BTreeSet<&str> = self.crowd.iter().map(|i| i.id.as_str()).collect();
        let reward_ids: BTreeSet<&str> = self.reward.iter().map(|i| i.id.as_str()).collect();
        for inst in &self.eval {
            if train_ids.contains(inst.id.as_str()) || reward_ids.contains(inst.id.as_str()) {
                return Err(Error::Dataset(format!("eval id `{}` overlaps training data", inst.id)));
            }
        }
        if require_reward {
            if let Some(inst) = self.reward.iter().find(|i| !crowd_ids.contains(i.id.as_str())) {
                return Err(Error::Dataset(format!("reward id `{}` is not in the crowd set", inst.id)));
            }
            let pos = self.reward.iter().filter(|i| i.expert_label == Some(Label::Positive)).count();
            let neg = self.reward.len() - pos;
            if pos == 0 || neg == 0 {
                return Err(Error::SingleClassReward { positives: pos, negatives: neg });
            }
        }
        Ok(())
    }
}

/// Reward split parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Fraction of the crowd set that receives expert labels, in (0, 1].
    pub expert_ratio: f64,
    /// Optional target imbalance applied (by expert label) before splitting.
    pub imbalance_target: Option<f64>,
    pub seed: u64,
    /// Replace the crowd label of reward instances by their expert label.
    pub merge_expert_into_crowd: bool,
}

impl SplitSpec {
    pub fn new(expert_ratio: f64, seed: u64) -> Self {
        Self { expert_ratio, imbalance_target: None, seed, merge_expert_into_crowd: false }
    }
}

/// Negatives over positives under the chosen label source.
pub fn imbalance_ratio(instances: &[Instance], source: LabelSource) -> Result<f64> {
    let (neg, pos) = class_counts(instances, source)?;
    if pos == 0 {
        return Err(Error::UndefinedRatio(source.name()));
    }
    Ok(neg as f64 / pos as f64)
}

/// `(negatives, positives)`; every instance must carry the label.
pub fn class_counts(instances: &[Instance], source: LabelSource) -> Result<(usize, usize)> {
    let mut pos = 0;
    for inst in instances {
        if inst.require_label(source)?.is_positive() {
            pos += 1;
        }
    }
    Ok((instances.len() - pos, pos))
}

pub(crate) fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Splits `total` across buckets proportionally to `counts` (largest remainder;
/// remainder ties go to the lower bucket index).
pub(crate) fn apportion(total: usize, counts: &[usize]) -> Vec<usize> {
    let sum: usize = counts.iter().sum();
    if sum == 0 {
        return vec![0; counts.len()];
    }
    let quotas: Vec<f64> = counts.iter().map(|&c| total as f64 * c as f64 / sum as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut left = total.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(counts.len() * 2) {
        if left == 0 {
            break;
        }
        if alloc[i] < counts[i] {
            alloc[i] += 1;
            left -= 1;
        }
    }
    alloc
}

/// Draws the expert reward set from a crowd set whose instances carry both labels.
///
/// Returns `(crowd, reward)`. The crowd list keeps every input instance with its
/// crowd label only; reward instances keep only their expert label. The reward
/// size is `round_half_up(ratio * N)` apportioned across expert-label strata.
pub fn split_reward(crowd_with_expert: &[Instance], spec: &SplitSpec) -> Result<(Vec<Instance>, Vec<Instance>)> {
    if !(spec.expert_ratio > 0.0 && spec.expert_ratio <= 1.0) {
        return Err(Error::Config(format!("expert_ratio must be in (0, 1], got {}", spec.expert_ratio)));
    }
    for inst in crowd_with_expert {
        inst.require_label(LabelSource::Crowd)?;
        inst.require_label(LabelSource::Expert)?;
    }
    let pool: Vec<Instance> = match spec.imbalance_target {
        Some(gamma) => subsample_to_imbalance(crowd_with_expert, gamma, spec.seed, LabelSource::Expert)?,
        None => crowd_with_expert.to_vec(),
    };
    let size = round_half_up(spec.expert_ratio * pool.len() as f64);
    if size < 2 {
        return Err(Error::Config(format!(
            "expert_ratio {} of {} instances gives a reward set of {size}; need at least 2",
            spec.expert_ratio,
            pool.len()
        )));
    }

    let strata: [Vec<usize>; 2] = [
        (0..pool.len()).filter(|&i| pool[i].expert_label == Some(Label::Negative)).collect(),
        (0..pool.len()).filter(|&i| pool[i].expert_label == Some(Label::Positive)).collect(),
    ];
    if strata[0].is_empty() {
        return Err(Error::EmptyStratum("negative"));
    }
    if strata[1].is_empty() {
        return Err(Error::EmptyStratum("positive"));
    }
    let mut alloc = apportion(size, &[strata[0].len(), strata[1].len()]);
    // both classes must be present for the pairwise reward term
    for c in 0..2 {
        if alloc[c] == 0 {
            let other = 1 - c;
            alloc[c] = 1;
            alloc[other] -= 1;
        }
    }

    let mut rng = rng::stream(spec.seed, tags::SPLIT);
    let mut chosen = vec![false; pool.len()];
    for (stratum, &take) in strata.iter().zip(&alloc) {
        let mut idx = stratum.clone();
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(take) {
            chosen[i] = true;
        }
    }

    let mut crowd = Vec::with_capacity(pool.len());
    let mut reward = Vec::with_capacity(size);
    for (inst, &is_reward) in pool.iter().zip(&chosen) {
        let mut c = inst.clone();
        c.expert_label = None;
        if is_reward {
            if spec.merge_expert_into_crowd {
                c.crowd_label = inst.expert_label;
            }
            let mut r = inst.clone();
            r.crowd_label = None;
            reward.push(r);
        }
        crowd.push(c);
    }
    Ok((crowd, reward))
}

/// Drops random positives so that negatives/positives reaches `gamma`.
///
/// Keeps every negative and `floor(N⁻ / gamma)` positives, in input order.
pub fn subsample_to_imbalance(
    instances: &[Instance],
    gamma: f64,
    seed: u64,
    source: LabelSource,
) -> Result<Vec<Instance>> {
    let current = imbalance_ratio(instances, source)?;
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::Config(format!("imbalance target must be positive, got {gamma}")));
    }
    if gamma < current * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "imbalance target {gamma} is below the current ratio {current}; only positives can be removed"
        )));
    }
    let (neg, pos) = class_counts(instances, source)?;
    let keep = ((neg as f64 / gamma) + 1e-9).floor() as usize;
    let keep = keep.min(pos);
    let mut positives: Vec<usize> = (0..instances.len())
        .filter(|&i| instances[i].label(source) == Some(Label::Positive))
        .collect();
    let mut rng = rng::stream(seed, tags::SUBSAMPLE);
    positives.shuffle(&mut rng);
    let mut kept = vec![false; instances.len()];
    for &i in positives.iter().take(keep) {
        kept[i] = true;
    }
    Ok(instances
        .iter()
        .enumerate()
        .filter(|(i, inst)| inst.label(source) == Some(Label::Negative) || kept[*i])
        .map(|(_, inst)| inst.clone())
        .collect())
}
