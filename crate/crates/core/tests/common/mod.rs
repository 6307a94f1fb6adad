#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reward_sgd::data::{Label, SparseVec};
use reward_sgd::model::{ModelKind, ModelSpec, ParamVector};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_spec(r: &mut ChaCha8Rng) -> ModelSpec {
    let d = r.random_range(1..=8);
    if r.random_bool(0.5) {
        ModelSpec::linear(d)
    } else {
        ModelSpec::one_hidden(d, r.random_range(1..=5))
    }
}

pub fn random_params(spec: &ModelSpec, r: &mut ChaCha8Rng, scale: f64) -> ParamVector {
    ParamVector::from_vec((0..spec.param_count()).map(|_| r.random_range(-scale..scale)).collect())
}

/// Sparse vector with roughly half the coordinates set.
pub fn random_x(dim: usize, r: &mut ChaCha8Rng) -> SparseVec {
    let mut idx = Vec::new();
    let mut val = Vec::new();
    for i in 0..dim {
        if r.random_bool(0.6) {
            idx.push(i as u32);
            val.push(r.random_range(-1.5..1.5));
        }
    }
    SparseVec::new(dim, idx, val).unwrap()
}

pub fn random_label(r: &mut ChaCha8Rng) -> Label {
    Label::from_bool(r.random_bool(0.5))
}

/// Central differences of `f` at `theta`.
pub fn fd_grad(theta: &ParamVector, h: f64, f: impl Fn(&ParamVector) -> f64) -> Vec<f64> {
    (0..theta.len())
        .map(|k| {
            let mut up = theta.clone().into_vec();
            let mut dn = up.clone();
            up[k] += h;
            dn[k] -= h;
            (f(&ParamVector::from_vec(up)) - f(&ParamVector::from_vec(dn))) / (2.0 * h)
        })
        .collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Plain sigmoid and logistic loss for a linear model, written out directly.
pub fn linear_prob(w: &[f64], x: &SparseVec) -> f64 {
    let d = x.dim();
    let mut s = w[d];
    for (i, v) in x.iter() {
        s += w[i] * v;
    }
    1.0 / (1.0 + (-s).exp())
}

/// Double loop over all positive/negative pairs, ties credited one half.
pub fn brute_auc(scores: &[f64], labels: &[Label]) -> Option<f64> {
    let (mut wins, mut ties, mut pairs) = (0u64, 0u64, 0u64);
    for (i, li) in labels.iter().enumerate() {
        if !li.is_positive() {
            continue;
        }
        for (j, lj) in labels.iter().enumerate() {
            if lj.is_positive() {
                continue;
            }
            pairs += 1;
            if scores[i] > scores[j] {
                wins += 1;
            } else if scores[i] == scores[j] {
                ties += 1;
            }
        }
    }
    (pairs > 0).then(|| (wins as f64 + 0.5 * ties as f64) / pairs as f64)
}

pub fn model_kind_name(spec: &ModelSpec) -> &'static str {
    match spec.kind {
        ModelKind::Linear => "linear",
        ModelKind::OneHidden => "one_hidden",
    }
}
