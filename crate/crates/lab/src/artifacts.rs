//! Per-run files: metrics CSV, selection dumps, summary JSON.

use std::path::Path;

use olnl_core::trainer::SampleAudit;
use olnl_core::{EpochRecord, NoiseKind, SelectionQuality};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::fsio;

pub const METRICS_FILE: &str = "metrics.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const SELECTION_DIR: &str = "selection";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub lr: f64,
    pub n_clean: usize,
    pub n_id_high: usize,
    pub n_id_rest: usize,
    pub n_ood: usize,
    #[serde(rename = "L_c")]
    pub l_c: f64,
    #[serde(rename = "L_n")]
    pub l_n: f64,
    #[serde(rename = "L_cons")]
    pub l_cons: f64,
    #[serde(rename = "L_total")]
    pub l_total: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub clean_precision: Option<f64>,
    pub clean_recall: Option<f64>,
    pub ood_precision: Option<f64>,
    pub ood_recall: Option<f64>,
}

impl From<&EpochRecord> for MetricsRow {
    fn from(r: &EpochRecord) -> Self {
        MetricsRow {
            epoch: r.epoch,
            lr: r.lr,
            n_clean: r.counts.clean,
            n_id_high: r.counts.id_high,
            n_id_rest: r.counts.id_rest,
            n_ood: r.counts.ood,
            l_c: r.losses.clean,
            l_n: r.losses.noisy,
            l_cons: r.losses.consistency,
            l_total: r.losses.total,
            train_acc: r.train_acc,
            test_acc: r.test_acc,
            clean_precision: r.quality.clean.precision,
            clean_recall: r.quality.clean.recall,
            ood_precision: r.quality.ood.precision,
            ood_recall: r.quality.ood.recall,
        }
    }
}

pub fn encode_metrics(rows: &[MetricsRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| LabError::Invalid(format!("cannot encode metrics: {e}")))?;
    }
    if rows.is_empty() {
        // keep the schema visible even before the first epoch lands
        w.write_record([
            "epoch", "lr", "n_clean", "n_id_high", "n_id_rest", "n_ood", "L_c", "L_n", "L_cons", "L_total",
            "train_acc", "test_acc", "clean_precision", "clean_recall", "ood_precision", "ood_recall",
        ])
        .map_err(|e| LabError::Invalid(e.to_string()))?;
    }
    w.into_inner().map_err(|e| LabError::Invalid(e.to_string()))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fsio::read_to_string(path)?;
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| LabError::format(path, e))
}

/// Mean test accuracy over the last ten rows that have one.
pub fn last10(rows: &[MetricsRow]) -> Option<f64> {
    let accs: Vec<f64> = rows.iter().filter_map(|r| r.test_acc).collect();
    if accs.is_empty() {
        return None;
    }
    let tail = &accs[accs.len().saturating_sub(10)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub epoch: usize,
    pub id: usize,
    pub d: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub s: f64,
    pub view_disagreement: bool,
    pub margin: f64,
    pub set: String,
    pub target: Option<Vec<f64>>,
}

pub fn encode_selection(epoch: usize, audit: &[SampleAudit]) -> Result<Vec<u8>> {
    let mut sorted: Vec<&SampleAudit> = audit.iter().collect();
    sorted.sort_by_key(|a| a.id);
    let mut out = Vec::new();
    for a in sorted {
        let rec = SelectionRecord {
            epoch,
            id: a.id,
            d: a.stats.divergence,
            p: a.stats.clean_prob,
            s: a.stats.confidence,
            view_disagreement: a.stats.view_disagreement,
            margin: a.stats.margin,
            set: a.assignment.name().to_string(),
            target: a.target.clone(),
        };
        serde_json::to_writer(&mut out, &rec).map_err(|e| LabError::Invalid(e.to_string()))?;
        out.push(b'\n');
    }
    Ok(out)
}

pub fn selection_path(run_dir: &Path, epoch: usize) -> std::path::PathBuf {
    run_dir.join(SELECTION_DIR).join(format!("epoch-{epoch:04}.jsonl"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub run: String,
    pub preset: String,
    pub variant: String,
    pub seed: u64,
    pub noise: NoiseKind,
    pub closed_rate: f64,
    pub overall_rate: f64,
    pub epochs: usize,
    pub last10_mean: Option<f64>,
    pub final_test_acc: Option<f64>,
    pub final_train_acc: Option<f64>,
    pub final_quality: Option<SelectionQuality>,
    pub wall_clock_seconds: f64,
    pub config: RunConfig,
}

impl Summary {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| LabError::Invalid(e.to_string()))?;
        fsio::write_atomic(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&fsio::read_to_string(path)?).map_err(|e| LabError::format(path, e))
    }
}
