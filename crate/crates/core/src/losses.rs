//! Supervised, pseudo-label, AUC and reward-set losses.

use serde::{Deserialize, Serialize};

use crate::data::{Label, SparseVec};
use crate::error::{Error, Result};
use crate::model::{ce_grad, forward, score_grad, sigmoid, ModelSpec, ParamVector};

/// Which model output feeds the pairwise surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Logit,
    Prob,
}

impl ScoreKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logit" => Some(ScoreKind::Logit),
            "prob" => Some(ScoreKind::Prob),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Logit => "logit",
            ScoreKind::Prob => "prob",
        }
    }
}

/// Trade-off between mean cross-entropy (`lambda`) and the AUC surrogate (`1 - lambda`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardLossConfig {
    pub lambda: f64,
    pub score_kind: ScoreKind,
}

impl Default for RewardLossConfig {
    fn default() -> Self {
        Self { lambda: 0.5, score_kind: ScoreKind::Prob }
    }
}

impl RewardLossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("reward lambda must be in [0, 1], got {}", self.lambda)));
        }
        Ok(())
    }
}

/// Hard pseudo-labels with confidence masking at `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelConfig {
    pub threshold: f64,
}

impl Default for PseudoLabelConfig {
    fn default() -> Self {
        Self { threshold: 0.95 }
    }
}

impl PseudoLabelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!("pseudo-label threshold must be in [0.5, 1], got {}", self.threshold)));
        }
        Ok(())
    }
}

/// A labeled input borrowed from an instance.
#[derive(Debug, Clone, Copy)]
pub struct LabeledRef<'a> {
    pub id: &'a str,
    pub x: &'a SparseVec,
    pub y: Label,
}

/// `Σ wᵢ lᵢ + β Σ w_{n+j} l^u_j`; `weights` covers the labeled then the unlabeled losses.
pub fn training_loss(sup: &[f64], unsup: &[f64], weights: &[f64], beta: f64) -> Result<f64> {
    if weights.len() != sup.len() + unsup.len() {
        return Err(Error::LengthMismatch { left: weights.len(), right: sup.len() + unsup.len() });
    }
    let (ws, wu) = weights.split_at(sup.len());
    let labeled: f64 = ws.iter().zip(sup).map(|(w, l)| w * l).sum();
    let unlabeled: f64 = wu.iter().zip(unsup).map(|(w, l)| w * l).sum();
    Ok(labeled + beta * unlabeled)
}

/// `(ŷ, confident)`; `p = 0.5` maps to the positive class.
pub fn pseudo_label(
    spec: &ModelSpec,
    params: &ParamVector,
    x: &SparseVec,
    config: &PseudoLabelConfig,
) -> Result<(Label, bool)> {
    let p = forward(spec, params, x)?.prob;
    Ok(pseudo_label_from_prob(p, config))
}

pub fn pseudo_label_from_prob(p: f64, config: &PseudoLabelConfig) -> (Label, bool) {
    (Label::from_bool(p >= 0.5), p.max(1.0 - p) >= config.threshold)
}

/// Cross-entropy against a fixed pseudo-label, masked to zero when not confident.
pub fn unsup_loss_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    x: &SparseVec,
    pseudo: Label,
    confident: bool,
) -> Result<(f64, ParamVector)> {
    if confident {
        ce_grad(spec, params, x, pseudo)
    } else {
        Ok((0.0, ParamVector::zeros(spec.param_count())))
    }
}

/// Mann–Whitney AUC with ties credited one half.
///
/// Sorts once and walks tie groups, so the cost is `O(n log n)`.
pub fn auc_estimate(scores: &[f64], labels: &[Label]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|l| l.is_positive()).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // credit counted in half-units to keep the sum exact
    let mut half_units: u128 = 0;
    let mut neg_below: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group = &order[i..j];
        let pos_in = group.iter().filter(|&&k| labels[k].is_positive()).count() as u128;
        let neg_in = group.len() as u128 - pos_in;
        half_units += pos_in * (2 * neg_below + neg_in);
        neg_below += neg_in;
        i = j;
    }
    Ok(half_units as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// Pairwise squared surrogate `f(s) = (1 + s)²`.
pub fn pairwise_squared(s: f64) -> f64 {
    (1.0 + s) * (1.0 + s)
}

fn surrogate_score_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    x: &SparseVec,
    kind: ScoreKind,
) -> Result<(f64, ParamVector)> {
    let (s, mut g) = score_grad(spec, params, x)?;
    match kind {
        ScoreKind::Logit => Ok((s, g)),
        ScoreKind::Prob => {
            let p = sigmoid(s);
            g.scale(p * (1.0 - p));
            Ok((p, g))
        }
    }
}

/// Mean of `f(Φ(x⁻) − Φ(x⁺))` over all negative/positive pairs, with its gradient.
pub fn auc_surrogate_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    pos: &[&SparseVec],
    neg: &[&SparseVec],
    kind: ScoreKind,
) -> Result<(f64, ParamVector)> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClassReward { positives: pos.len(), negatives: neg.len() });
    }
    let pos_sg = pos.iter().map(|x| surrogate_score_grad(spec, params, x, kind)).collect::<Result<Vec<_>>>()?;
    let neg_sg = neg.iter().map(|x| surrogate_score_grad(spec, params, x, kind)).collect::<Result<Vec<_>>>()?;
    let norm = 1.0 / (pos.len() as f64 * neg.len() as f64);

    // d/dΦ⁻ f = 2(1 + Φ⁻ − Φ⁺), d/dΦ⁺ f = −2(1 + Φ⁻ − Φ⁺)
    let mut loss = 0.0;
    let mut pos_coef = vec![0.0; pos.len()];
    let mut neg_coef = vec![0.0; neg.len()];
    for (i, (sn, _)) in neg_sg.iter().enumerate() {
        for (j, (sp, _)) in pos_sg.iter().enumerate() {
            let m = sn - sp;
            loss += pairwise_squared(m);
            let d = 2.0 * (1.0 + m);
            neg_coef[i] += d;
            pos_coef[j] -= d;
        }
    }
    let mut grad = ParamVector::zeros(spec.param_count());
    for ((_, g), c) in neg_sg.iter().zip(&neg_coef) {
        grad.axpy_in_place(g, c * norm)?;
    }
    for ((_, g), c) in pos_sg.iter().zip(&pos_coef) {
        grad.axpy_in_place(g, c * norm)?;
    }
    Ok((loss * norm, grad))
}

/// `λ · mean CE + (1 − λ) · AUC surrogate` over a reward batch.
pub fn reward_loss_grad(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: &[LabeledRef<'_>],
    config: &RewardLossConfig,
) -> Result<(f64, ParamVector)> {
    config.validate()?;
    let pos: Vec<&SparseVec> = batch.iter().filter(|r| r.y.is_positive()).map(|r| r.x).collect();
    let neg: Vec<&SparseVec> = batch.iter().filter(|r| !r.y.is_positive()).map(|r| r.x).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClassReward { positives: pos.len(), negatives: neg.len() });
    }
    let mut loss = 0.0;
    let mut grad = ParamVector::zeros(spec.param_count());
    if config.lambda > 0.0 {
        let w = config.lambda / batch.len() as f64;
        for r in batch {
            let (l, g) = ce_grad(spec, params, r.x, r.y)?;
            loss += w * l;
            grad.axpy_in_place(&g, w)?;
        }
    }
    if config.lambda < 1.0 {
        let (l, g) = auc_surrogate_grad(spec, params, &pos, &neg, config.score_kind)?;
        let w = 1.0 - config.lambda;
        loss += w * l;
        grad.axpy_in_place(&g, w)?;
    }
    Ok((loss, grad))
}

/// Loss value only; same arithmetic path as [`reward_loss_grad`].
pub fn reward_loss(
    spec: &ModelSpec,
    params: &ParamVector,
    batch: &[LabeledRef<'_>],
    config: &RewardLossConfig,
) -> Result<f64> {
    reward_loss_grad(spec, params, batch, config).map(|(l, _)| l)
}
