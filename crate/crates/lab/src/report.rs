//! Summary tables over finished runs: one row per noise setting and variant,
//! last-10 mean accuracy as mean ± sample standard deviation over seeds.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use olnl_core::{NoiseKind, Variant};
use serde::Serialize;

use crate::artifacts::{self, Summary};
use crate::error::{LabError, Result};
use crate::fsio;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Noise setting, e.g. `sym-20%`.
    pub setting: String,
    pub variant: String,
    pub runs: usize,
    /// Percent.
    pub mean: f64,
    /// Percent; zero for a single run.
    pub std: f64,
}

pub fn setting_label(kind: NoiseKind, rate: f64) -> String {
    let k = match kind {
        NoiseKind::Symmetric => "sym",
        NoiseKind::Asymmetric => "asym",
    };
    format!("{k}-{}%", (rate * 100.0).round())
}

/// Reads `summary.json` from every directory, listing all that lack one.
pub fn load_summaries(dirs: &[PathBuf]) -> Result<Vec<Summary>> {
    if dirs.is_empty() {
        return Err(LabError::Invalid("report needs at least one run directory".into()));
    }
    let missing: Vec<PathBuf> =
        dirs.iter().map(|d| d.join(artifacts::SUMMARY_FILE)).filter(|p| !p.is_file()).collect();
    if !missing.is_empty() {
        return Err(LabError::MissingArtifacts(missing));
    }
    dirs.iter().map(|d| Summary::load(&d.join(artifacts::SUMMARY_FILE))).collect()
}

fn variant_rank(name: &str) -> usize {
    Variant::ALL.iter().position(|v| v.name() == name).unwrap_or(Variant::ALL.len())
}

pub fn rows(summaries: &[Summary]) -> Result<Vec<ReportRow>> {
    let mut groups: BTreeMap<(String, usize, String), Vec<f64>> = BTreeMap::new();
    for s in summaries {
        let acc = s
            .last10_mean
            .ok_or_else(|| LabError::Invalid(format!("run {} has no test accuracy", s.run)))?;
        groups
            .entry((setting_label(s.noise, s.closed_rate), variant_rank(&s.variant), s.variant.clone()))
            .or_default()
            .push(acc * 100.0);
    }
    Ok(groups
        .into_iter()
        .map(|((setting, _, variant), xs)| {
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            ReportRow { setting, variant, runs: xs.len(), mean, std }
        })
        .collect())
}

pub fn to_csv(rows: &[ReportRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| LabError::Invalid(e.to_string()))?;
    }
    w.into_inner().map_err(|e| LabError::Invalid(e.to_string()))
}

pub fn to_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::from("| Setting | Method | Runs | Last-10 accuracy (%) |\n|---|---|---:|---:|\n");
    for r in rows {
        out.push_str(&format!("| {} | {} | {} | {:.2} ± {:.2} |\n", r.setting, r.variant, r.runs, r.mean, r.std));
    }
    out
}

/// Writes `report.csv` and `report.md` into `out_dir`.
pub fn emit_report(dirs: &[PathBuf], out_dir: &Path) -> Result<Vec<ReportRow>> {
    let rows = rows(&load_summaries(dirs)?)?;
    fsio::write_atomic(&out_dir.join("report.csv"), &to_csv(&rows)?)?;
    fsio::write_atomic(&out_dir.join("report.md"), to_markdown(&rows).as_bytes())?;
    Ok(rows)
}
