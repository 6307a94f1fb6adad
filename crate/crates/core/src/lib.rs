//! Reward-set guided instance reweighting for binary classification with
//! noisy crowd labels, an unlabeled pool and a small expert-labeled set.
//!
//! Each training step weights the labeled and pseudo-labeled samples of a
//! batch by how well their loss gradient aligns with the gradient of a
//! reward loss (cross-entropy plus a pairwise AUC surrogate) on expert
//! labels, zeroes the misaligned ones, and takes a weighted SGD step.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod featurize;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod reweight;
pub mod rng;
pub mod trainer;

pub use data::{DatasetBundle, Instance, Label, LabelSource, SparseVec, SplitSpec};
pub use error::{Error, Result};
pub use metrics::MetricsReport;
pub use model::{ModelKind, ModelSpec, ParamVector, Prediction};
pub use trainer::{train, Method, TrainConfig, TrainOutcome};
