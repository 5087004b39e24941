//! One training run with its artifacts on disk, resumable from a checkpoint.

use std::path::{Path, PathBuf};
use std::time::Instant;

use olnl_core::{LabeledDataset, Trainer};

use crate::artifacts::{self, MetricsRow, Summary};
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{LabError, Result};
use crate::fsio;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue from `checkpoint.json` in the run directory when present.
    pub resume: bool,
    /// Stop once this many epochs are complete, leaving a checkpoint.
    pub until: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub dir: PathBuf,
    pub rows: Vec<MetricsRow>,
    /// Present once all epochs are done.
    pub summary: Option<Summary>,
}

fn dump_due(every: usize, epoch: usize, epochs: usize) -> bool {
    epoch + 1 == epochs || (every > 0 && (epoch + 1).is_multiple_of(every))
}

pub fn run(config: &RunConfig, dir: &Path, options: &RunOptions) -> Result<RunResult> {
    config.validate()?;
    let (train, test) = config.benchmark.build()?;
    run_on(config, &train, &test, dir, options)
}

/// Like [`run`] on datasets already in memory.
pub fn run_on(
    config: &RunConfig,
    train: &LabeledDataset,
    test: &LabeledDataset,
    dir: &Path,
    options: &RunOptions,
) -> Result<RunResult> {
    fsio::ensure_dir(dir)?;
    fsio::write_atomic(&dir.join(artifacts::CONFIG_FILE), config.to_toml()?.as_bytes())?;

    let mut trainer = Trainer::new(config.experiment.clone(), train, Some(test))?;
    let mut rows = Vec::new();
    let ckpt_path = dir.join(artifacts::CHECKPOINT_FILE);
    if options.resume && ckpt_path.exists() {
        let ckpt = Checkpoint::load(&ckpt_path)?;
        if ckpt.config != *config {
            return Err(LabError::Invalid(format!(
                "{}: checkpoint was written by a different configuration",
                ckpt_path.display()
            )));
        }
        rows = artifacts::read_metrics(&dir.join(artifacts::METRICS_FILE))?;
        if rows.len() < ckpt.epoch {
            return Err(LabError::format(dir.join(artifacts::METRICS_FILE), "fewer rows than checkpointed epochs"));
        }
        rows.truncate(ckpt.epoch);
        trainer = trainer.resume(ckpt.model, ckpt.optimizer, ckpt.epoch)?;
    }

    let epochs = config.experiment.train.epochs;
    let out = &config.output;
    let started = Instant::now();
    let mut last = None;
    while !trainer.is_finished() && options.until.is_none_or(|u| trainer.epoch() < u) {
        let epoch = trainer.epoch();
        let dump = dump_due(out.selection_every, epoch, epochs);
        trainer.set_audit(dump);
        let record = trainer.step_epoch()?;
        rows.push(MetricsRow::from(&record));
        fsio::write_atomic(&dir.join(artifacts::METRICS_FILE), &artifacts::encode_metrics(&rows)?)?;
        if dump {
            let bytes = artifacts::encode_selection(epoch, &record.audit)?;
            fsio::write_atomic(&artifacts::selection_path(dir, epoch), &bytes)?;
        }
        if out.checkpoint_every > 0 && (epoch + 1).is_multiple_of(out.checkpoint_every) {
            Checkpoint::new(config, epoch + 1, trainer.model(), trainer.optimizer()).save(&ckpt_path)?;
        }
        last = Some(record);
    }
    Checkpoint::new(config, trainer.epoch(), trainer.model(), trainer.optimizer()).save(&ckpt_path)?;

    let summary = if trainer.is_finished() {
        let final_row = rows.last();
        let summary = Summary {
            run: config.run_name(),
            preset: config.preset.clone(),
            variant: config.experiment.train.variant.name().to_string(),
            seed: config.experiment.train.seed,
            noise: config.benchmark.noise.kind,
            closed_rate: config.benchmark.noise.closed_rate,
            overall_rate: config.benchmark.noise.overall_rate(),
            epochs,
            last10_mean: artifacts::last10(&rows),
            final_test_acc: final_row.and_then(|r| r.test_acc),
            final_train_acc: final_row.map(|r| r.train_acc),
            final_quality: last.map(|r| r.quality),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            config: config.clone(),
        };
        summary.save(&dir.join(artifacts::SUMMARY_FILE))?;
        Some(summary)
    } else {
        None
    };
    Ok(RunResult { dir: dir.to_path_buf(), rows, summary })
}
