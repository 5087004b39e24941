//! Learning with open-set label noise on small vector datasets.
//!
//! A batch is scored with two augmented views of every sample. Samples whose
//! prediction sits close to the annotated label, or that the model is very
//! confident about, are trained on smoothed labels. Of the rest, samples whose
//! views disagree are treated as out-of-distribution and dropped, confident
//! in-distribution samples are trained on sharpened two-view pseudo-labels,
//! and everything feeds a symmetric-KL consistency term.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the
//! command line live in a separate crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augment;
pub mod error;
pub mod losses;
pub mod margin;
pub mod math;
pub mod model;
pub mod noise;
pub mod objective;
pub mod preset;
pub mod relabel;
pub mod schedule;
pub mod seed;
pub mod selection;
pub mod trainer;

pub use augment::{predict_two_views, AugmentPolicy, PredictionPair, ViewKind};
pub use error::{Error, Result};
pub use losses::{CleanEntropyMode, ConsistencyScope, LossBreakdown, LossWeights};
pub use margin::{Assignment, MarginConfig, MarginReference, MarginScale, NoisyFilters, Partition};
pub use model::{Gradients, Mlp, Optimizer, UpdateRule};
pub use noise::{BenchmarkSpec, LabeledDataset, NoiseKind, NoiseSpec, NoiseStatus, Sample, Split};
pub use objective::{gradient_check, LossSelector, ObjectiveItem, Role};
pub use preset::{mini as mini_preset, preset, MINI, PRESETS};
pub use relabel::{RelabelConfig, TargetDistribution, TargetOrigin};
pub use schedule::LrSchedule;
pub use selection::{SampleStats, SelectionRule, SelectionThresholds, SelectionView};
pub use trainer::{
    assign, partition_batch, run_training, selection_quality, EpochRecord, ExperimentConfig, SelectionQuality, TrainConfig,
    TrainOutcome, Trainer, Variant,
};
