//! JSON reports, history and long-format CSV, and run manifests.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::experiment::{Aggregate, RunFailure, RunRecord, SweepResult};
use crate::metrics::{MetricsReport, METRIC_NAMES};
use crate::trainer::{Method, TrainHistory};

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// `step,reward_loss,accuracy,f1,bacc,auc,zero_weight_count`; undefined values are empty cells.
pub fn history_csv(history: &TrainHistory) -> String {
    let mut out = String::from("step,reward_loss,accuracy,f1,bacc,auc,zero_weight_count\n");
    for r in &history.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.step,
            cell(r.reward_loss),
            r.eval.accuracy,
            r.eval.f1,
            cell(r.eval.bacc),
            cell(r.eval.auc),
            r.zero_weight_count
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub key: String,
    pub value: String,
}

pub fn config_entries(entries: Vec<(&'static str, String)>) -> Vec<ConfigEntry> {
    entries.into_iter().map(|(k, v)| ConfigEntry { key: k.to_string(), value: v }).collect()
}

/// Output of a single training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub seed: u64,
    pub dataset_fingerprint: String,
    pub best_step: usize,
    pub steps_run: usize,
    pub migrated: Vec<String>,
    pub report: MetricsReport,
    pub config: Vec<ConfigEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub method: Method,
    pub grid_value: f64,
    pub metric: String,
    #[serde(flatten)]
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub grid_value: f64,
    pub seed: u64,
    pub sha256: String,
}

/// Sweep output: configuration echo, inputs, per-run results and seed aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub axis: String,
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub config: Vec<ConfigEntry>,
    pub datasets: Vec<DatasetFingerprint>,
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
    pub failure_count: usize,
    pub failures: Vec<RunFailure>,
}

impl RunManifest {
    pub fn new(
        axis: &str,
        grid: &[f64],
        seeds: &[u64],
        methods: &[Method],
        config: Vec<ConfigEntry>,
        result: SweepResult,
    ) -> Self {
        let mut datasets: Vec<DatasetFingerprint> = Vec::new();
        for r in &result.runs {
            if !datasets.iter().any(|d| d.grid_value == r.grid_value && d.seed == r.seed) {
                datasets.push(DatasetFingerprint {
                    grid_value: r.grid_value,
                    seed: r.seed,
                    sha256: r.dataset_fingerprint.clone(),
                });
            }
        }
        let aggregates = result
            .aggregates()
            .into_iter()
            .map(|(method, grid_value, metric, aggregate)| AggregateRow {
                method,
                grid_value,
                metric: metric.to_string(),
                aggregate,
            })
            .collect();
        Self {
            axis: axis.to_string(),
            grid: grid.to_vec(),
            seeds: seeds.to_vec(),
            methods: methods.to_vec(),
            config,
            datasets,
            aggregates,
            failure_count: result.failures.len(),
            failures: result.failures,
            runs: result.runs,
        }
    }
}

/// `method,grid_value,seed,metric,value`, one row per run and metric.
pub fn long_csv(runs: &[RunRecord]) -> String {
    let mut out = String::from("method,grid_value,seed,metric,value\n");
    for r in runs {
        for metric in METRIC_NAMES {
            let _ = writeln!(out, "{},{},{},{},{}", r.method, r.grid_value, r.seed, metric, cell(r.report.get(metric)));
        }
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}
