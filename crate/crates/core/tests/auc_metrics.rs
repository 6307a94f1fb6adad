mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use reward_sgd::data::{Instance, Label, SparseVec};
use reward_sgd::losses::auc_estimate;
use reward_sgd::metrics::{evaluate, MetricsReport};
use reward_sgd::model::{forward, ModelSpec};

fn labels_from(bits: &[bool]) -> Vec<Label> {
    bits.iter().map(|&b| Label::from_bool(b)).collect()
}

/// Scores drawn from a small grid so ties are common.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=50).prop_flat_map(|n| {
        (prop::collection::vec((-4i32..4).prop_map(|k| k as f64 * 0.25), n), prop::collection::vec(any::<bool>(), n))
    })
}

proptest! {
    #[test]
    fn auc_equals_pairwise_count((scores, bits) in scored()) {
        let labels = labels_from(&bits);
        match brute_auc(&scores, &labels) {
            Some(expected) => prop_assert_eq!(auc_estimate(&scores, &labels).unwrap(), expected),
            None => prop_assert!(auc_estimate(&scores, &labels).is_err()),
        }
    }

    #[test]
    fn auc_ignores_monotone_transforms((scores, bits) in scored()) {
        let labels = labels_from(&bits);
        prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
        let base = auc_estimate(&scores, &labels).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| 2.0 * s + 3.0).collect();
        let squashed: Vec<f64> = scores.iter().map(|s| s.tanh()).collect();
        prop_assert_eq!(auc_estimate(&affine, &labels).unwrap(), base);
        prop_assert_eq!(auc_estimate(&squashed, &labels).unwrap(), base);
    }

    #[test]
    fn metrics_stay_in_unit_interval((scores, bits) in scored()) {
        let labels = labels_from(&bits);
        let probs: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let m = MetricsReport::from_scores(&probs, &scores, &labels, 0.5).unwrap();
        let c = m.confusion;
        prop_assert_eq!(c.tp + c.fp + c.tn + c.fn_, labels.len());
        for v in [Some(m.accuracy), Some(m.f1), m.bacc, m.auc].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert_eq!(m.bacc.is_some(), bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
    }

    #[test]
    fn bacc_ignores_duplicating_negatives((scores, bits) in scored(), k in 2usize..5) {
        prop_assume!(bits.iter().any(|&b| b) && bits.iter().any(|&b| !b));
        let labels = labels_from(&bits);
        let probs: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let base = MetricsReport::from_scores(&probs, &scores, &labels, 0.5).unwrap();
        let (mut p2, mut s2, mut l2) = (probs.clone(), scores.clone(), labels.clone());
        for i in 0..labels.len() {
            if !labels[i].is_positive() {
                for _ in 1..k {
                    p2.push(probs[i]);
                    s2.push(scores[i]);
                    l2.push(labels[i]);
                }
            }
        }
        let dup = MetricsReport::from_scores(&p2, &s2, &l2, 0.5).unwrap();
        prop_assert!((dup.bacc.unwrap() - base.bacc.unwrap()).abs() < 1e-12);
    }
}

#[test]
fn auc_examples() {
    let l = labels_from(&[true, true, false, false]);
    assert_eq!(auc_estimate(&[0.9, 0.8, 0.1, 0.2], &l).unwrap(), 1.0);
    assert_eq!(auc_estimate(&[0.3; 4], &l).unwrap(), 0.5);
    assert!(auc_estimate(&[0.1, 0.2], &labels_from(&[true, true])).is_err());
    let mut r = rng(31);
    let scores: Vec<f64> = (0..20).map(|_| r.random_range(-1.0..1.0)).collect();
    let labels: Vec<Label> = (0..20).map(|i| Label::from_bool(i % 3 == 0)).collect();
    assert_eq!(auc_estimate(&scores, &labels).unwrap(), brute_auc(&scores, &labels).unwrap());
}

#[test]
fn confusion_examples() {
    let labels = labels_from(&[true, true, false, false]);
    let m = MetricsReport::from_scores(&[0.9, 0.1, 0.9, 0.1], &[0.0; 4], &labels, 0.5).unwrap();
    assert_eq!((m.accuracy, m.f1, m.bacc), (0.5, 0.5, Some(0.5)));

    let labels = labels_from(&[true, false, false]);
    let m = MetricsReport::from_scores(&[0.1; 3], &[0.0; 3], &labels, 0.5).unwrap();
    assert_eq!(m.accuracy, 2.0 / 3.0);
    assert_eq!(m.bacc, Some(0.5));
    assert_eq!(m.f1, 0.0);
}

#[test]
fn f1_equals_accuracy_on_balanced_confusion() {
    let labels = labels_from(&[true, true, true, false, false, false]);
    let probs = [0.9, 0.8, 0.2, 0.1, 0.3, 0.7];
    let m = MetricsReport::from_scores(&probs, &probs, &labels, 0.5).unwrap();
    assert_eq!(m.confusion.tp, m.confusion.tn);
    assert_eq!(m.f1, m.accuracy);
}

#[test]
fn evaluate_auc_uses_model_scores() {
    let mut r = rng(32);
    let spec = ModelSpec::one_hidden(5, 3);
    let theta = random_params(&spec, &mut r, 1.0);
    let insts: Vec<Instance> = (0..30)
        .map(|i| Instance::new(format!("e{i}"), random_x(5, &mut r)).with_expert(Label::from_bool(i % 4 == 0)))
        .collect();
    let m = evaluate(&spec, &theta, &insts, 0.5).unwrap();
    let scores: Vec<f64> = insts.iter().map(|i| forward(&spec, &theta, &i.features).unwrap().score).collect();
    let labels: Vec<Label> = insts.iter().map(|i| i.expert_label.unwrap()).collect();
    assert_eq!(m.auc, Some(auc_estimate(&scores, &labels).unwrap()));

    let one = [Instance::new("x", SparseVec::zeros(5)).with_expert(Label::Positive)];
    let m = evaluate(&spec, &theta, &one, 0.5).unwrap();
    assert_eq!((m.bacc, m.auc), (None, None));
}
