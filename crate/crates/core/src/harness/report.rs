use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::datagen::Dataset;
use crate::graph::{FeatureMode, GraphSummary};
use crate::metrics::MetricsReport;
use crate::rgcn::{EpochRecord, TrainOutcome};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Field excluded from determinism comparisons.
pub const TIMESTAMP_FIELD: &str = "timestamp_unix";

pub(crate) fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

/// Drops the timestamp so two reports can be compared for determinism.
pub fn strip_timestamp(mut value: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = value.as_object_mut() {
        obj.remove(TIMESTAMP_FIELD);
    }
    value
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_auc: Option<f64>,
    pub final_train_loss: Option<f64>,
}

impl TrainingSummary {
    pub fn from_outcome(outcome: &TrainOutcome) -> Self {
        let best = outcome
            .history
            .iter()
            .find(|r| r.epoch == outcome.best_epoch)
            .map(|r| r.val_auc);
        Self {
            epochs: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_auc: best,
            final_train_loss: outcome.history.last().map(|r| r.train_loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_accounts: usize,
    pub n_transactions: usize,
    pub bad_fraction: f64,
}

impl DatasetSummary {
    pub fn of(ds: &Dataset) -> Self {
        Self {
            n_accounts: ds.accounts.len(),
            n_transactions: ds.transactions.len(),
            bad_fraction: ds.bad_fraction(),
        }
    }
}

/// `report_<mode>_<seed>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub software_version: String,
    pub mode: FeatureMode,
    pub seed: u64,
    pub evaluated_split: String,
    pub metrics: MetricsReport,
    pub training: TrainingSummary,
    pub dataset: DatasetSummary,
    pub graph: GraphSummary,
    pub history: Vec<EpochRecord>,
    pub config: ExperimentConfig,
    pub timestamp_unix: u64,
}

/// Output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub software_version: String,
    pub mode: FeatureMode,
    pub model_seed: u64,
    pub evaluated_split: String,
    pub metrics: MetricsReport,
    pub timestamp_unix: u64,
}

impl EvaluationReport {
    pub fn new(mode: FeatureMode, model_seed: u64, split: &str, metrics: MetricsReport) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            software_version: super::SOFTWARE_VERSION.to_string(),
            mode,
            model_seed,
            evaluated_split: split.to_string(),
            metrics,
            timestamp_unix: now_unix(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub metrics: MetricsReport,
}

/// Mean and sample standard deviation; `std` is `None` for fewer than two values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: Option<f64>,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.len() >= 2).then(|| {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        });
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub mode: FeatureMode,
    pub runs: Vec<SeedResult>,
    pub accuracy: Stat,
    pub f1: Stat,
    pub auc: Stat,
}

impl ArmSummary {
    pub fn new(mode: FeatureMode, runs: Vec<SeedResult>) -> Self {
        let stat = |f: fn(&MetricsReport) -> f64| {
            Stat::of(&runs.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
        };
        Self {
            mode,
            accuracy: stat(|m| m.accuracy),
            f1: stat(|m| m.f1),
            auc: stat(|m| m.auc),
            runs,
        }
    }
}

/// Hybrid minus synthetic, on the per-mode means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    pub accuracy: f64,
    pub f1: f64,
    pub auc: f64,
}

impl Deltas {
    pub fn between(synthetic: &ArmSummary, hybrid: &ArmSummary) -> Self {
        Self {
            accuracy: hybrid.accuracy.mean - synthetic.accuracy.mean,
            f1: hybrid.f1.mean - synthetic.f1.mean,
            auc: hybrid.auc.mean - synthetic.auc.mean,
        }
    }
}

/// `comparison.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub software_version: String,
    pub seeds: Vec<u64>,
    pub arms: Vec<ArmSummary>,
    pub deltas: Deltas,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
    pub timestamp_unix: u64,
}

impl ComparisonReport {
    pub fn arm(&self, mode: FeatureMode) -> Option<&ArmSummary> {
        self.arms.iter().find(|a| a.mode == mode)
    }
}
