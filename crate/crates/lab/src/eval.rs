//! Metrics recomputed from a saved checkpoint.

use std::path::Path;

use olnl_core::trainer::accuracy;
use olnl_core::{selection_quality, NoiseStatus, SelectionQuality, Trainer};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::error::{LabError, Result};
use crate::fsio;

pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub epoch: usize,
    pub variant: String,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Partition counts of the frozen model: clean, id-high, id-rest, ood.
    pub counts: [usize; 4],
    pub quality: SelectionQuality,
}

pub fn evaluate(ckpt: &Checkpoint) -> Result<EvalReport> {
    let config = &ckpt.config;
    config.validate()?;
    let (train, test) = config.benchmark.build()?;
    let trainer = Trainer::new(config.experiment.clone(), &train, Some(&test))?.resume(
        ckpt.model.clone(),
        ckpt.optimizer.clone(),
        ckpt.epoch,
    )?;
    let (partition, _) = trainer.inspect()?;
    let statuses: Vec<NoiseStatus> = train.samples.iter().map(|s| s.status).collect();
    Ok(EvalReport {
        epoch: ckpt.epoch,
        variant: config.experiment.train.variant.name().to_string(),
        train_acc: accuracy(trainer.model(), &train)?,
        test_acc: accuracy(trainer.model(), &test)?,
        counts: [partition.clean.len(), partition.id_high.len(), partition.id_rest.len(), partition.ood.len()],
        quality: selection_quality(&partition, &statuses),
    })
}

impl EvalReport {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| LabError::Invalid(e.to_string()))?;
        fsio::write_atomic(path, text.as_bytes())
    }
}
