//! One bi-level reweighting step.
//!
//! The meta-gradient of the reward loss with respect to a per-sample weight,
//! taken at `w = 0` through one virtual SGD step, is proportional to
//! `-∇L^e(θ)·∇lᵢ(θ)`. Because the virtual parameters at `w = 0` equal `θ`,
//! every gradient here is evaluated at the current parameters, and the
//! positive prefactors (inner step size, weight step size) are dropped: the
//! rectify/normalize pipeline is invariant to positive scaling.

use serde::{Deserialize, Serialize};

use crate::data::{Label, SparseVec};
use crate::error::{Error, Result};
use crate::losses::{
    pseudo_label, reward_loss, reward_loss_grad, unsup_loss_grad, LabeledRef, PseudoLabelConfig,
    RewardLossConfig,
};
use crate::model::{ce_grad, dot, ModelSpec, ParamVector};

/// How per-sample weights are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// Reward-guided: inner products, rectified and normalized.
    Meta,
    /// Fixed `1/n` for labeled and `1/m` for unlabeled samples.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaStepConfig {
    /// Inner (and outer) SGD step size.
    pub alpha: f64,
    /// Weight of the unsupervised term.
    pub beta: f64,
    pub reward_loss: RewardLossConfig,
    pub pseudo: PseudoLabelConfig,
    pub weighting: Weighting,
}

impl Default for MetaStepConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1.0,
            reward_loss: RewardLossConfig::default(),
            pseudo: PseudoLabelConfig::default(),
            weighting: Weighting::Meta,
        }
    }
}

impl MetaStepConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        self.reward_loss.validate()?;
        self.pseudo.validate()
    }
}

/// Final per-sample weights over the labeled then unlabeled batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub values: Vec<f64>,
    /// Inner products before rectification (empty for uniform weighting).
    pub raw: Vec<f64>,
}

impl WeightVector {
    /// Rectifies and normalizes raw meta-gradients.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let values = normalize(&rectify(&raw))?;
        Ok(Self { values, raw })
    }

    pub fn uniform(n: usize, m: usize) -> Self {
        let mut values = vec![1.0 / n as f64; n];
        values.extend(std::iter::repeat_n(1.0 / m as f64, m));
        Self { values, raw: Vec::new() }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `rawᵢ = g_e·∇lᵢ` for labeled samples, `β · g_e·∇l^u_j` for unlabeled ones.
pub fn meta_raw_weights(
    reward_grad: &ParamVector,
    labeled_grads: &[ParamVector],
    unsup_grads: &[ParamVector],
    beta: f64,
) -> Result<Vec<f64>> {
    let mut raw = Vec::with_capacity(labeled_grads.len() + unsup_grads.len());
    for g in labeled_grads {
        raw.push(dot(reward_grad, g)?);
    }
    for g in unsup_grads {
        raw.push(beta * dot(reward_grad, g)?);
    }
    Ok(raw)
}

/// Elementwise `max(w, 0)`.
pub fn rectify(raw: &[f64]) -> Vec<f64> {
    raw.iter().map(|&w| if w > 0.0 { w } else { 0.0 }).collect()
}

/// Divides by `Σw + σ` where `σ = 1` only when the sum is zero.
pub fn normalize(rectified: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = rectified.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::NegativeWeight { index, value });
    }
    let sum: f64 = rectified.iter().sum();
    let sigma = if sum == 0.0 { 1.0 } else { 0.0 };
    Ok(rectified.iter().map(|w| w / (sum + sigma)).collect())
}

/// Unlabeled input borrowed from an instance.
#[derive(Debug, Clone, Copy)]
pub struct UnlabeledRef<'a> {
    pub id: &'a str,
    pub x: &'a SparseVec,
}

/// Per-step record kept for diagnostics and the migration policy.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub pseudo_labels: Vec<(Label, bool)>,
    pub sup_losses: Vec<f64>,
    pub unsup_losses: Vec<f64>,
    pub zero_weight_labeled: Vec<String>,
    pub zero_weight_unlabeled: Vec<String>,
    pub reward_loss_before: Option<f64>,
    pub reward_loss_after: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MetaStep {
    pub params: ParamVector,
    pub weights: WeightVector,
    pub diagnostics: StepDiagnostics,
}

/// Runs one reweighted update from `params`.
///
/// Order: pseudo-label the unlabeled batch, take every gradient at `params`,
/// derive weights, then apply `θ − α(Σ wᵢ∇lᵢ + β Σ wⱼ∇l^u_j)`. With uniform
/// weighting the reward batch may be empty.
pub fn meta_step(
    spec: &ModelSpec,
    params: &ParamVector,
    labeled: &[LabeledRef<'_>],
    unlabeled: &[UnlabeledRef<'_>],
    reward: &[LabeledRef<'_>],
    config: &MetaStepConfig,
    step: usize,
) -> Result<MetaStep> {
    config.validate()?;
    if labeled.is_empty() && unlabeled.is_empty() {
        return Err(Error::EmptyDataset("training batch"));
    }

    let mut pseudo_labels = Vec::with_capacity(unlabeled.len());
    for u in unlabeled {
        pseudo_labels.push(pseudo_label(spec, params, u.x, &config.pseudo)?);
    }

    let mut sup_losses = Vec::with_capacity(labeled.len());
    let mut labeled_grads = Vec::with_capacity(labeled.len());
    for r in labeled {
        let (l, g) = ce_grad(spec, params, r.x, r.y)?;
        sup_losses.push(l);
        labeled_grads.push(g);
    }
    let mut unsup_losses = Vec::with_capacity(unlabeled.len());
    let mut unsup_grads = Vec::with_capacity(unlabeled.len());
    for (u, &(y, confident)) in unlabeled.iter().zip(&pseudo_labels) {
        let (l, g) = unsup_loss_grad(spec, params, u.x, y, confident)?;
        unsup_losses.push(l);
        unsup_grads.push(g);
    }

    let (weights, reward_loss_before) = match config.weighting {
        Weighting::Meta => {
            let (le, ge) = reward_loss_grad(spec, params, reward, &config.reward_loss)?;
            let raw = meta_raw_weights(&ge, &labeled_grads, &unsup_grads, config.beta)?;
            (WeightVector::from_raw(raw)?, Some(le))
        }
        Weighting::Uniform => {
            let before = if reward.is_empty() { None } else { Some(reward_loss(spec, params, reward, &config.reward_loss)?) };
            (WeightVector::uniform(labeled.len(), unlabeled.len()), before)
        }
    };

    let (wl, wu) = weights.values.split_at(labeled.len());
    let mut direction = ParamVector::zeros(spec.param_count());
    for (g, &w) in labeled_grads.iter().zip(wl) {
        direction.axpy_in_place(g, w)?;
    }
    for (g, &w) in unsup_grads.iter().zip(wu) {
        direction.axpy_in_place(g, config.beta * w)?;
    }
    let mut next = params.clone();
    next.axpy_in_place(&direction, -config.alpha)?;
    if !next.is_finite() {
        return Err(Error::NonFiniteUpdate { step });
    }

    let reward_loss_after = match reward_loss_before {
        Some(_) => Some(reward_loss(spec, &next, reward, &config.reward_loss)?),
        None => None,
    };
    let zero_weight_labeled =
        labeled.iter().zip(wl).filter(|(_, w)| **w == 0.0).map(|(r, _)| r.id.to_string()).collect();
    let zero_weight_unlabeled =
        unlabeled.iter().zip(wu).filter(|(_, w)| **w == 0.0).map(|(u, _)| u.id.to_string()).collect();

    Ok(MetaStep {
        params: next,
        weights,
        diagnostics: StepDiagnostics {
            pseudo_labels,
            sup_losses,
            unsup_losses,
            zero_weight_labeled,
            zero_weight_unlabeled,
            reward_loss_before,
            reward_loss_after,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::ScoreKind;

    #[test]
    fn rectify_cases() {
        assert_eq!(rectify(&[0.5, -0.3, 0.0]), vec![0.5, 0.0, 0.0]);
        assert_eq!(rectify(&[-1.0, -2.0]), vec![0.0, 0.0]);
        let once = rectify(&[0.2, -0.1, 3.0]);
        assert_eq!(rectify(&once), once);
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize(&[0.5, 0.0, 0.5]).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(normalize(&[2.0, 0.0, 2.0]).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(normalize(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(normalize(&[1.0, -0.5]), Err(Error::NegativeWeight { index: 1, .. })));
    }

    #[test]
    fn raw_weight_cases() {
        let g = ParamVector::from_vec(vec![0.5, -1.0, 2.0]);
        let zero = ParamVector::zeros(3);
        assert_eq!(meta_raw_weights(&zero, &[g.clone()], &[g.clone()], 1.0).unwrap(), vec![0.0, 0.0]);
        let raw = meta_raw_weights(&g, &[g.clone()], &[g.clone()], 0.5).unwrap();
        assert_eq!(raw, vec![5.25, 2.625]);
        assert!(meta_raw_weights(&g, &[zero.clone(), ParamVector::zeros(2)], &[], 1.0).is_err());
    }

    fn sv(v: &[f64]) -> SparseVec {
        SparseVec::from_dense(v).unwrap()
    }

    #[test]
    fn all_negative_raw_is_a_no_op() {
        // labeled sample labeled against the reward direction
        let spec = ModelSpec::linear(1);
        let params = ParamVector::from_vec(vec![0.0, 0.0]);
        let (xp, xn, xl) = (sv(&[1.0]), sv(&[-1.0]), sv(&[1.0]));
        let reward = [
            LabeledRef { id: "p", x: &xp, y: Label::Positive },
            LabeledRef { id: "n", x: &xn, y: Label::Negative },
        ];
        let labeled = [LabeledRef { id: "l", x: &xl, y: Label::Negative }];
        let cfg = MetaStepConfig { reward_loss: RewardLossConfig { lambda: 1.0, score_kind: ScoreKind::Logit }, ..Default::default() };
        let out = meta_step(&spec, &params, &labeled, &[], &reward, &cfg, 0).unwrap();
        assert!(out.weights.raw[0] < 0.0);
        assert_eq!(out.weights.values, vec![0.0]);
        assert_eq!(out.params, params);
        assert_eq!(out.diagnostics.zero_weight_labeled, vec!["l".to_string()]);
    }

    #[test]
    fn single_positive_sample_takes_full_step() {
        let spec = ModelSpec::linear(1);
        let params = ParamVector::from_vec(vec![0.1, -0.2]);
        let (xp, xn, xl) = (sv(&[1.0]), sv(&[-1.0]), sv(&[0.7]));
        let reward = [
            LabeledRef { id: "p", x: &xp, y: Label::Positive },
            LabeledRef { id: "n", x: &xn, y: Label::Negative },
        ];
        let labeled = [LabeledRef { id: "l", x: &xl, y: Label::Positive }];
        let cfg = MetaStepConfig::default();
        let out = meta_step(&spec, &params, &labeled, &[], &reward, &cfg, 0).unwrap();
        assert!(out.weights.raw[0] > 0.0);
        assert_eq!(out.weights.values, vec![1.0]);
        let (_, g) = ce_grad(&spec, &params, &xl, Label::Positive).unwrap();
        let mut expected = params.clone();
        expected.axpy_in_place(&g, -cfg.alpha).unwrap();
        assert_eq!(out.params, expected);
    }

    #[test]
    fn meta_requires_two_class_reward() {
        let spec = ModelSpec::linear(1);
        let params = ParamVector::zeros(2);
        let x = sv(&[1.0]);
        let labeled = [LabeledRef { id: "l", x: &x, y: Label::Positive }];
        let reward = [LabeledRef { id: "p", x: &x, y: Label::Positive }];
        let err = meta_step(&spec, &params, &labeled, &[], &reward, &MetaStepConfig::default(), 0);
        assert!(matches!(err, Err(Error::SingleClassReward { .. })));
    }
}
