//! Accuracy, positive-class F1, balanced accuracy and AUC.

use serde::{Deserialize, Serialize};

use crate::data::{Instance, Label, LabelSource};
use crate::error::{Error, Result};
use crate::losses::auc_estimate;
use crate::model::{forward, ModelSpec, ParamVector};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `2tp / (2tp + fp + fn)`, zero when the denominator is zero.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }

    /// Mean of the per-class recalls; `None` unless both classes are present.
    pub fn bacc(&self) -> Option<f64> {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        (pos > 0 && neg > 0).then(|| (self.tp as f64 / pos as f64 + self.tn as f64 / neg as f64) / 2.0)
    }
}

/// Evaluation summary. `bacc` and `auc` are `None` on single-class input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub f1: f64,
    pub bacc: Option<f64>,
    pub auc: Option<f64>,
    pub confusion: Confusion,
}

impl MetricsReport {
    pub fn from_scores(probs: &[f64], scores: &[f64], labels: &[Label], threshold: f64) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset("evaluation set"));
        }
        let mut c = Confusion::default();
        for (&p, &y) in probs.iter().zip(labels) {
            match (p >= threshold, y.is_positive()) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        let auc = match auc_estimate(scores, labels) {
            Ok(a) => Some(a),
            Err(Error::UndefinedAuc) => None,
            Err(e) => return Err(e),
        };
        Ok(Self { accuracy: c.accuracy(), f1: c.f1(), bacc: c.bacc(), auc, confusion: c })
    }

    /// Value by metric name (`accuracy`, `f1`, `bacc`, `auc`).
    pub fn get(&self, metric: &str) -> Option<f64> {
        match metric {
            "accuracy" => Some(self.accuracy),
            "f1" => Some(self.f1),
            "bacc" => self.bacc,
            "auc" => self.auc,
            _ => None,
        }
    }
}

pub const METRIC_NAMES: [&str; 4] = ["accuracy", "f1", "bacc", "auc"];

/// Scores `instances` against their expert labels; predicts positive when `p >= threshold`.
pub fn evaluate(spec: &ModelSpec, params: &ParamVector, instances: &[Instance], threshold: f64) -> Result<MetricsReport> {
    evaluate_with(spec, params, instances, threshold, LabelSource::Expert)
}

pub fn evaluate_with(
    spec: &ModelSpec,
    params: &ParamVector,
    instances: &[Instance],
    threshold: f64,
    source: LabelSource,
) -> Result<MetricsReport> {
    let mut probs = Vec::with_capacity(instances.len());
    let mut scores = Vec::with_capacity(instances.len());
    let mut labels = Vec::with_capacity(instances.len());
    for inst in instances {
        let pred = forward(spec, params, &inst.features)?;
        probs.push(pred.prob);
        scores.push(pred.score);
        labels.push(inst.require_label(source)?);
    }
    MetricsReport::from_scores(&probs, &scores, &labels, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(probs: &[f64], labels: &[u8]) -> MetricsReport {
        let labels: Vec<Label> = labels.iter().map(|&l| Label::from_u8(l).unwrap()).collect();
        MetricsReport::from_scores(probs, probs, &labels, 0.5).unwrap()
    }

    #[test]
    fn perfect_predictions() {
        let r = report(&[0.9, 0.8, 0.1, 0.2], &[1, 1, 0, 0]);
        assert_eq!((r.accuracy, r.f1, r.bacc, r.auc), (1.0, 1.0, Some(1.0), Some(1.0)));
    }

    #[test]
    fn majority_predictor() {
        let r = report(&[0.1, 0.2, 0.3], &[1, 0, 0]);
        assert!((r.accuracy - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.bacc, Some(0.5));
        assert_eq!(r.f1, 0.0);
    }

    #[test]
    fn one_of_each_cell() {
        let r = report(&[0.9, 0.9, 0.1, 0.1], &[1, 0, 1, 0]);
        assert_eq!(r.confusion, Confusion { tp: 1, fp: 1, tn: 1, fn_: 1 });
        assert_eq!((r.accuracy, r.f1, r.bacc), (0.5, 0.5, Some(0.5)));
    }

    #[test]
    fn single_class_is_undefined_for_bacc_and_auc() {
        let r = report(&[0.9, 0.2], &[1, 1]);
        assert_eq!(r.bacc, None);
        assert_eq!(r.auc, None);
        assert_eq!(r.accuracy, 0.5);
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_is_error() {
        assert!(MetricsReport::from_scores(&[], &[], &[], 0.5).is_err());
    }
}
