//! Python bindings: datasets, models, training and the scalar helpers.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use reward_sgd::data::{imbalance_ratio as ratio_of, DatasetBundle, Instance, Label, LabelSource, SparseVec};
use reward_sgd::featurize::{empirical_noise_ratio, HashFeaturizerConfig, TruthLabels};
use reward_sgd::io::{
    bundle_fingerprint, read_checkpoint, write_checkpoint, write_dataset, write_truth, Checkpoint, RunConfig,
};
use reward_sgd::metrics::{evaluate as evaluate_model, MetricsReport};
use reward_sgd::model::{forward, ModelKind, ModelSpec, ParamVector};
use reward_sgd::trainer::Method;

fn value_err(e: reward_sgd::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn labels_from(values: &[u8]) -> PyResult<Vec<Label>> {
    values
        .iter()
        .map(|&v| Label::from_u8(v).ok_or_else(|| PyValueError::new_err(format!("labels must be 0 or 1, got {v}"))))
        .collect()
}

fn run_config(overrides: Option<BTreeMap<String, String>>) -> PyResult<RunConfig> {
    let mut c = RunConfig::default();
    for (k, v) in overrides.unwrap_or_default() {
        c.set(&k, &v).map_err(PyValueError::new_err)?;
    }
    c.validate().map_err(value_err)?;
    Ok(c)
}

fn report_dict<'py>(py: Python<'py>, r: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("accuracy", r.accuracy)?;
    d.set_item("f1", r.f1)?;
    d.set_item("bacc", r.bacc)?;
    d.set_item("auc", r.auc)?;
    d.set_item("tp", r.confusion.tp)?;
    d.set_item("fp", r.confusion.fp)?;
    d.set_item("tn", r.confusion.tn)?;
    d.set_item("fn", r.confusion.fn_)?;
    Ok(d)
}

/// Crowd, unlabeled, reward and eval sets, plus hidden labels when known.
#[pyclass(module = "reward_sgd", skip_from_py_object)]
#[derive(Clone)]
struct Dataset {
    bundle: DatasetBundle,
    truth: Option<TruthLabels>,
}

#[pymethods]
impl Dataset {
    /// Synthetic two-Gaussian data; `config` maps `key = value` settings to strings.
    #[staticmethod]
    #[pyo3(signature = (seed=0, config=None))]
    fn synthetic(seed: u64, config: Option<BTreeMap<String, String>>) -> PyResult<Self> {
        let c = run_config(config)?;
        let (bundle, truth) = c.benchmark.synthetic_bundle(seed).map_err(value_err)?;
        Ok(Self { bundle, truth: Some(truth) })
    }

    /// Writes `crowd.tsv`, `unlabeled.tsv`, `reward.tsv`, `eval.tsv` and `truth.tsv`.
    fn save(&self, dir: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&dir).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        let b = &self.bundle;
        for (name, set) in [("crowd.tsv", &b.crowd), ("unlabeled.tsv", &b.unlabeled), ("reward.tsv", &b.reward), ("eval.tsv", &b.eval)] {
            write_dataset(&dir.join(name), set).map_err(value_err)?;
        }
        if let Some(t) = &self.truth {
            write_truth(&dir.join("truth.tsv"), t).map_err(value_err)?;
        }
        Ok(())
    }

    #[getter]
    fn dim(&self) -> Option<usize> {
        self.bundle.dim()
    }

    /// `{"crowd": n, "unlabeled": m, "reward": q, "eval": v}`.
    fn sizes(&self) -> BTreeMap<&'static str, usize> {
        let b = &self.bundle;
        BTreeMap::from([("crowd", b.crowd.len()), ("unlabeled", b.unlabeled.len()), ("reward", b.reward.len()), ("eval", b.eval.len())])
    }

    fn fingerprint(&self) -> String {
        bundle_fingerprint(&self.bundle)
    }

    /// Fraction of crowd labels that disagree with the hidden labels.
    fn noise_ratio(&self) -> Option<f64> {
        self.truth.as_ref().and_then(|t| empirical_noise_ratio(&self.bundle.crowd, t))
    }

    fn crowd_imbalance(&self) -> PyResult<f64> {
        ratio_of(&self.bundle.crowd, LabelSource::Crowd).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        let b = &self.bundle;
        format!("Dataset(crowd={}, unlabeled={}, reward={}, eval={})", b.crowd.len(), b.unlabeled.len(), b.reward.len(), b.eval.len())
    }
}

/// A classifier specification with its parameters.
#[pyclass(module = "reward_sgd", skip_from_py_object)]
#[derive(Clone)]
struct Model {
    spec: ModelSpec,
    params: ParamVector,
}

fn dense_row(spec: &ModelSpec, row: &[f64]) -> PyResult<SparseVec> {
    if row.len() != spec.input_dim {
        return Err(PyValueError::new_err(format!("row has {} features, model expects {}", row.len(), spec.input_dim)));
    }
    SparseVec::from_dense(row).map_err(value_err)
}

#[pymethods]
impl Model {
    #[new]
    #[pyo3(signature = (input_dim, kind="linear", hidden_dim=16, init_scale=0.01, seed=0))]
    fn new(input_dim: usize, kind: &str, hidden_dim: usize, init_scale: f64, seed: u64) -> PyResult<Self> {
        let kind = ModelKind::parse(kind).ok_or_else(|| PyValueError::new_err(format!("unknown model kind `{kind}`")))?;
        let spec = ModelSpec { kind, input_dim, hidden_dim, init_scale, seed };
        let params = spec.init().map_err(value_err)?;
        Ok(Self { spec, params })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let c = read_checkpoint(&path).map_err(value_err)?;
        Ok(Self { spec: c.spec, params: c.params })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        let c = Checkpoint { spec: self.spec.clone(), featurizer: None, params: self.params.clone() };
        write_checkpoint(&path, &c).map_err(value_err)
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.params.as_slice().to_vec()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.spec.kind.name()
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    /// Positive-class probabilities for dense feature rows.
    fn predict_proba(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        rows.iter()
            .map(|r| Ok(forward(&self.spec, &self.params, &dense_row(&self.spec, r)?).map_err(value_err)?.prob))
            .collect()
    }

    /// Metrics on dense rows with 0/1 labels.
    fn evaluate<'py>(&self, py: Python<'py>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> PyResult<Bound<'py, PyDict>> {
        let labels = labels_from(&labels)?;
        if rows.len() != labels.len() {
            return Err(PyValueError::new_err("rows and labels differ in length"));
        }
        let insts = rows
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (r, y))| Ok(Instance::new(format!("r{i}"), dense_row(&self.spec, r)?).with_expert(y)))
            .collect::<PyResult<Vec<_>>>()?;
        let report = evaluate_model(&self.spec, &self.params, &insts, 0.5).map_err(value_err)?;
        report_dict(py, &report)
    }

    /// Metrics on the dataset's eval split.
    fn evaluate_dataset<'py>(&self, py: Python<'py>, dataset: &Dataset) -> PyResult<Bound<'py, PyDict>> {
        let report = evaluate_model(&self.spec, &self.params, &dataset.bundle.eval, 0.5).map_err(value_err)?;
        report_dict(py, &report)
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={}, input_dim={}, params={})", self.spec.kind.name(), self.spec.input_dim, self.params.len())
    }
}

/// Trains on `dataset`; returns `(model, report, history)`.
#[pyfunction]
#[pyo3(signature = (dataset, method="egal", seed=0, config=None))]
fn train<'py>(
    py: Python<'py>,
    dataset: &Dataset,
    method: &str,
    seed: u64,
    config: Option<BTreeMap<String, String>>,
) -> PyResult<(Model, Bound<'py, PyDict>, Bound<'py, PyList>)> {
    let method = Method::parse(method).ok_or_else(|| PyValueError::new_err(format!("unknown method `{method}`")))?;
    let c = run_config(config)?;
    let dim = dataset.bundle.dim().ok_or_else(|| PyValueError::new_err("dataset is empty"))?;
    let bundle = dataset.bundle.clone();
    let bench = c.benchmark.clone();
    let outcome = py
        .detach(move || bench.run(&bundle, method, seed))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let history = PyList::empty(py);
    for r in &outcome.history.records {
        let d = report_dict(py, &r.eval)?;
        d.set_item("step", r.step)?;
        d.set_item("reward_loss", r.reward_loss)?;
        d.set_item("zero_weight_count", r.zero_weight_count)?;
        d.set_item("migrated", r.migrated.clone())?;
        history.append(d)?;
    }
    let report = report_dict(py, &outcome.report)?;
    report.set_item("best_step", outcome.best_step)?;
    report.set_item("steps_run", outcome.steps_run)?;
    let spec = c.benchmark.model.spec(dim, seed);
    Ok((Model { spec, params: outcome.params }, report, history))
}

/// Mann-Whitney AUC with ties credited one half.
#[pyfunction]
fn auc_estimate(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    reward_sgd::losses::auc_estimate(&scores, &labels_from(&labels)?).map_err(value_err)
}

/// Hashed n-gram features as `{bucket: value}`.
#[pyfunction]
#[pyo3(signature = (text, dimension=4096, ngram_min=1, ngram_max=2, lowercase=true, signed_hashing=true))]
fn hash_features(
    text: &str,
    dimension: usize,
    ngram_min: usize,
    ngram_max: usize,
    lowercase: bool,
    signed_hashing: bool,
) -> PyResult<BTreeMap<usize, f64>> {
    let config = HashFeaturizerConfig { dimension, ngram_min, ngram_max, lowercase, signed_hashing };
    let hashed = reward_sgd::featurize::hash_features(text, &config).map_err(value_err)?;
    Ok(hashed.vector.iter().collect())
}

#[pyfunction]
fn rectify(raw: Vec<f64>) -> Vec<f64> {
    reward_sgd::reweight::rectify(&raw)
}

#[pyfunction]
fn normalize(weights: Vec<f64>) -> PyResult<Vec<f64>> {
    reward_sgd::reweight::normalize(&weights).map_err(value_err)
}

/// Negatives per positive.
#[pyfunction]
fn imbalance_ratio(labels: Vec<u8>) -> PyResult<f64> {
    let insts: Vec<Instance> = labels_from(&labels)?
        .into_iter()
        .enumerate()
        .map(|(i, y)| Instance::new(i.to_string(), SparseVec::zeros(1)).with_expert(y))
        .collect();
    ratio_of(&insts, LabelSource::Expert).map_err(value_err)
}

#[pymodule(name = "reward_sgd")]
fn reward_sgd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(auc_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(hash_features, m)?)?;
    m.add_function(wrap_pyfunction!(rectify, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(imbalance_ratio, m)?)?;
    Ok(())
}
