//! From-scratch binary classifiers with exact per-sample gradients.
//!
//! Parameter layout:
//! - `linear`: `[w (input_dim), b]`
//! - `one_hidden`: `[W (hidden × input, row-major), c (hidden), v (hidden), b]`

use std::fmt;
use std::ops::Index;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Label, SparseVec};
use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// Lower clamp applied to probabilities inside `log`.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    OneHidden,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::OneHidden => "one_hidden",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(ModelKind::Linear),
            "one_hidden" => Some(ModelKind::OneHidden),
            _ => None,
        }
    }
}

/// Architecture and initialization of a classifier. The hidden layer uses tanh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub init_scale: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn linear(input_dim: usize) -> Self {
        Self { kind: ModelKind::Linear, input_dim, hidden_dim: 0, init_scale: 0.01, seed: 0 }
    }

    pub fn one_hidden(input_dim: usize, hidden_dim: usize) -> Self {
        Self { kind: ModelKind::OneHidden, input_dim, hidden_dim, init_scale: 0.1, seed: 0 }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Config("input_dim must be >= 1".into()));
        }
        if self.kind == ModelKind::OneHidden && self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1 for one_hidden".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!("init_scale must be > 0, got {}", self.init_scale)));
        }
        Ok(())
    }

    /// Total parameter count.
    pub fn param_count(&self) -> usize {
        match self.kind {
            ModelKind::Linear => self.input_dim + 1,
            ModelKind::OneHidden => self.hidden_dim * (self.input_dim + 2) + 1,
        }
    }

    /// Gaussian weights scaled by `init_scale`; biases start at zero.
    pub fn init(&self) -> Result<ParamVector> {
        self.validate()?;
        let mut rng = rng::stream(self.seed, tags::INIT);
        let mut values = vec![0.0; self.param_count()];
        let weights = match self.kind {
            ModelKind::Linear => 0..self.input_dim,
            ModelKind::OneHidden => 0..self.hidden_dim * self.input_dim,
        };
        for v in &mut values[weights] {
            *v = self.init_scale * rng.sample::<f64, _>(StandardNormal);
        }
        if self.kind == ModelKind::OneHidden {
            let off = self.hidden_dim * (self.input_dim + 1);
            for v in &mut values[off..off + self.hidden_dim] {
                *v = self.init_scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(ParamVector(values))
    }

    fn check(&self, params: &ParamVector, x: &SparseVec) -> Result<()> {
        if x.dim() != self.input_dim {
            return Err(Error::DimensionMismatch { expected: self.input_dim, got: x.dim() });
        }
        if params.len() != self.param_count() {
            return Err(Error::LengthMismatch { left: params.len(), right: self.param_count() });
        }
        Ok(())
    }
}

/// Flat parameter (or gradient) vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Left-to-right sum of products.
    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        dot(self, other)
    }

    /// `self += step * direction`.
    pub fn axpy_in_place(&mut self, direction: &ParamVector, step: f64) -> Result<()> {
        if self.len() != direction.len() {
            return Err(Error::LengthMismatch { left: self.len(), right: direction.len() });
        }
        for (a, d) in self.0.iter_mut().zip(&direction.0) {
            *a += step * d;
        }
        Ok(())
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.0 {
            *v *= c;
        }
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Returns `params + step * direction`.
pub fn axpy(params: &ParamVector, direction: &ParamVector, step: f64) -> Result<ParamVector> {
    let mut out = params.clone();
    out.axpy_in_place(direction, step)?;
    Ok(out)
}

/// Inner product accumulated strictly left to right.
pub fn dot(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    let mut acc = 0.0;
    for (x, y) in a.0.iter().zip(&b.0) {
        acc += x * y;
    }
    Ok(acc)
}

/// Logit and probability for one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub score: f64,
    pub prob: f64,
}

impl fmt::Display for Prediction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={:.6} p={:.6}", self.score, self.prob)
    }
}

pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn hidden_pre(spec: &ModelSpec, p: &[f64], x: &SparseVec) -> Vec<f64> {
    let (d, h) = (spec.input_dim, spec.hidden_dim);
    let c = &p[h * d..h * d + h];
    (0..h)
        .map(|k| {
            let row = &p[k * d..(k + 1) * d];
            let mut acc = 0.0;
            for (i, v) in x.iter() {
                acc += row[i] * v;
            }
            acc + c[k]
        })
        .collect()
}

fn score_only(spec: &ModelSpec, params: &ParamVector, x: &SparseVec) -> f64 {
    let p = params.as_slice();
    match spec.kind {
        ModelKind::Linear => {
            let mut acc = 0.0;
            for (i, v) in x.iter() {
                acc += p[i] * v;
            }
            acc + p[spec.input_dim]
        }
        ModelKind::OneHidden => {
            let (d, h) = (spec.input_dim, spec.hidden_dim);
            let v_off = h * (d + 1);
            let mut acc = 0.0;
            for (k, a) in hidden_pre(spec, p, x).into_iter().enumerate() {
                acc += p[v_off + k] * a.tanh();
            }
            acc + p[v_off + h]
        }
    }
}

/// Score `s` and probability `sigmoid(s)`.
pub fn forward(spec: &ModelSpec, params: &ParamVector, x: &SparseVec) -> Result<Prediction> {
    spec.check(params, x)?;
    let score = score_only(spec, params, x);
    Ok(Prediction { score, prob: sigmoid(score) })
}

/// Score and its gradient with respect to every parameter.
pub fn score_grad(spec: &ModelSpec, params: &ParamVector, x: &SparseVec) -> Result<(f64, ParamVector)> {
    spec.check(params, x)?;
    let p = params.as_slice();
    let mut g = vec![0.0; p.len()];
    let score = match spec.kind {
        ModelKind::Linear => {
            for (i, v) in x.iter() {
                g[i] = v;
            }
            g[spec.input_dim] = 1.0;
            score_only(spec, params, x)
        }
        ModelKind::OneHidden => {
            let (d, h) = (spec.input_dim, spec.hidden_dim);
            let c_off = h * d;
            let v_off = h * (d + 1);
            let mut s = 0.0;
            for (k, a) in hidden_pre(spec, p, x).into_iter().enumerate() {
                let t = a.tanh();
                let vk = p[v_off + k];
                s += vk * t;
                g[v_off + k] = t;
                let back = vk * (1.0 - t * t);
                g[c_off + k] = back;
                for (i, xv) in x.iter() {
                    g[k * d + i] = back * xv;
                }
            }
            g[v_off + h] = 1.0;
            s + p[v_off + h]
        }
    };
    Ok((score, ParamVector(g)))
}

/// Binary cross-entropy from a score, with `log` arguments clamped at [`LOG_CLAMP`].
pub fn bce_from_score(score: f64, y: Label) -> Result<f64> {
    let p = sigmoid(score);
    let loss = match y {
        Label::Positive => -p.max(LOG_CLAMP).ln(),
        Label::Negative => -(1.0 - p).max(LOG_CLAMP).ln(),
    };
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NonFiniteLoss { score })
    }
}

/// Cross-entropy loss and its parameter gradient for one labeled input.
pub fn ce_grad(spec: &ModelSpec, params: &ParamVector, x: &SparseVec, y: Label) -> Result<(f64, ParamVector)> {
    let (score, mut g) = score_grad(spec, params, x)?;
    let loss = bce_from_score(score, y)?;
    g.scale(sigmoid(score) - y.as_f64());
    Ok((loss, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x2() -> SparseVec {
        SparseVec::new(2, vec![0, 1], vec![0.6, -0.8]).unwrap()
    }

    #[test]
    fn zero_params_give_half() {
        for spec in [ModelSpec::linear(2), ModelSpec::one_hidden(2, 3)] {
            let p = ParamVector::zeros(spec.param_count());
            let pred = forward(&spec, &p, &x2()).unwrap();
            assert_eq!(pred.score, 0.0);
            assert_eq!(pred.prob, 0.5);
            let (loss, _) = ce_grad(&spec, &p, &x2(), Label::Positive).unwrap();
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
            let (loss, _) = ce_grad(&spec, &p, &x2(), Label::Negative).unwrap();
            assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn linear_self_dot() {
        let spec = ModelSpec::linear(2);
        let p = ParamVector::from_vec(vec![0.6, -0.8, 0.0]);
        let s = forward(&spec, &p, &x2()).unwrap().score;
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_hidden_matches_dense_unrolled() {
        // W = [[1, 2], [-0.5, 0.25]], c = [0.1, -0.2], v = [0.7, -1.3], b = 0.05
        let spec = ModelSpec::one_hidden(2, 2);
        let p = ParamVector::from_vec(vec![1.0, 2.0, -0.5, 0.25, 0.1, -0.2, 0.7, -1.3, 0.05]);
        let x = [0.6, -0.8];
        let h0 = (1.0 * x[0] + 2.0 * x[1] + 0.1_f64).tanh();
        let h1 = (-0.5 * x[0] + 0.25 * x[1] - 0.2_f64).tanh();
        let expected = 0.7 * h0 - 1.3 * h1 + 0.05;
        let s = forward(&spec, &p, &x2()).unwrap().score;
        assert!((s - expected).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch_names_dims() {
        let spec = ModelSpec::linear(3);
        let p = ParamVector::zeros(4);
        let err = forward(&spec, &p, &x2()).unwrap_err().to_string();
        assert!(err.contains('2') && err.contains('3'), "{err}");
    }

    #[test]
    fn saturation() {
        let spec = ModelSpec::linear(2);
        let p = ParamVector::from_vec(vec![30.0, -40.0, 0.0]);
        let (loss, g) = ce_grad(&spec, &p, &x2(), Label::Positive).unwrap();
        assert!(loss < 1e-10);
        assert!(g.norm() < 1e-10);
    }

    #[test]
    fn axpy_and_dot() {
        let t = ParamVector::from_vec(vec![1.0, -2.0, 3.5]);
        let g = ParamVector::from_vec(vec![0.25, 0.5, -1.0]);
        assert_eq!(axpy(&t, &g, 0.0).unwrap(), t);
        let back = axpy(&axpy(&t, &g, -0.1).unwrap(), &g, 0.1).unwrap();
        for (a, b) in back.as_slice().iter().zip(t.as_slice()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let z = ParamVector::zeros(3);
        assert_eq!(dot(&axpy(&z, &g, 1.0).unwrap(), &g).unwrap(), 0.0625 + 0.25 + 1.0);
        let e0 = ParamVector::from_vec(vec![1.0, 0.0, 0.0]);
        let e1 = ParamVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(dot(&e0, &e1).unwrap(), 0.0);
        let ones = ParamVector::from_vec(vec![1.0; 17]);
        assert_eq!(dot(&ones, &ones).unwrap(), 17.0);
        assert!(dot(&ones, &e0).is_err());
        assert!(axpy(&ones, &e0, 1.0).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let spec = ModelSpec::one_hidden(4, 3).with_seed(5);
        assert_eq!(spec.init().unwrap(), spec.init().unwrap());
        assert_ne!(spec.init().unwrap(), spec.clone().with_seed(6).init().unwrap());
        assert_eq!(spec.init().unwrap().len(), 3 * 6 + 1);
    }
}
