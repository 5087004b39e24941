//! The training loop: plain cross-entropy warmup, then per batch two-view
//! prediction, clean/noisy selection, margin partition of the noisy set,
//! target construction and one update on the composite loss.

use alloc::vec::Vec;
use core::str::FromStr;

use rand::seq::SliceRandom;

use crate::augment::{pair_from_traces, predict_two_views, trace_two_views, AugmentPolicy, PredictionPair};
use crate::error::{Error, Result};
use crate::losses::{CleanEntropyMode, LossBreakdown, LossWeights};
use crate::margin::{classify_noisy, Assignment, MarginConfig, NoisyFilters, Partition};
use crate::math::{argmax, one_hot};
use crate::model::{Gradients, Mlp, Optimizer, Trace, UpdateRule};
use crate::noise::{LabeledDataset, NoiseStatus};
use crate::objective::{evaluate_traces, LossSelector, Role};
use crate::relabel::{pseudo_label, smooth_labels, RelabelConfig};
use crate::schedule::LrSchedule;
use crate::seed::{self, STREAM_AUGMENT, STREAM_SHUFFLE};
use crate::selection::{is_clean, sample_stats, SampleStats, SelectionRule, SelectionThresholds, SelectionView};

/// The method and its ablations.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    #[default]
    Full,
    /// Clean set from the small-divergence rule alone, without the
    /// high-confidence union.
    NoRss,
    /// Every noisy sample is discarded.
    NoMgm,
    /// Neither split: every sample is trained on its smoothed label.
    NoBoth,
    /// Partition kept, confident ID samples discarded instead of relabeled.
    NoSsl,
    NoMv,
    NoMp,
    /// Plain cross-entropy on annotated labels.
    Standard,
}

impl Variant {
    pub const ALL: [Variant; 8] = [
        Variant::Full,
        Variant::NoRss,
        Variant::NoMgm,
        Variant::NoBoth,
        Variant::NoSsl,
        Variant::NoMv,
        Variant::NoMp,
        Variant::Standard,
    ];

    /// The module and margin-function ablation grid.
    pub const ABLATIONS: [Variant; 7] = [
        Variant::Full,
        Variant::NoRss,
        Variant::NoMgm,
        Variant::NoBoth,
        Variant::NoSsl,
        Variant::NoMv,
        Variant::NoMp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoRss => "no-rss",
            Variant::NoMgm => "no-mgm",
            Variant::NoBoth => "no-both",
            Variant::NoSsl => "no-ssl",
            Variant::NoMv => "no-mv",
            Variant::NoMp => "no-mp",
            Variant::Standard => "standard",
        }
    }

    /// Whether batches are split into clean and noisy sets. Without the
    /// split every sample is trained as clean.
    pub fn uses_selection(self) -> bool {
        !matches!(self, Variant::NoBoth | Variant::Standard)
    }

    pub fn uses_margin_module(self) -> bool {
        !matches!(self, Variant::NoMgm | Variant::NoBoth | Variant::Standard)
    }

    pub fn filters(self) -> NoisyFilters {
        NoisyFilters {
            disagreement: self != Variant::NoMv,
            margin: self != Variant::NoMp,
        }
    }

    pub fn relabels(self) -> bool {
        self.uses_margin_module() && self != Variant::NoSsl
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::invalid(alloc::format!("unknown variant `{s}`")))
    }
}

impl core::fmt::Display for Variant {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Total epochs, warmup included.
    pub epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub schedule: LrSchedule,
    pub update_rule: UpdateRule,
    pub seed: u64,
    pub variant: Variant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            warmup_epochs: 10,
            batch_size: 64,
            schedule: LrSchedule::proportional_linear(100),
            update_rule: UpdateRule::default(),
            seed: 0,
            variant: Variant::Full,
        }
    }
}

/// Every setting a training run depends on.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hidden: Vec<usize>,
    pub augment: AugmentPolicy,
    pub selection: SelectionThresholds,
    pub selection_view: SelectionView,
    pub selection_rule: SelectionRule,
    pub margin: MarginConfig,
    pub relabel: RelabelConfig,
    pub loss: LossWeights,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            hidden: alloc::vec![32, 32],
            augment: AugmentPolicy::default(),
            selection: SelectionThresholds::default(),
            selection_view: SelectionView::Weak,
            selection_rule: SelectionRule::Union,
            margin: MarginConfig::default(),
            relabel: RelabelConfig::default(),
            loss: LossWeights::default(),
            train: TrainConfig::default(),
        }
    }
}

fn unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(alloc::format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        if t.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if t.epochs == 0 || t.warmup_epochs > t.epochs {
            return Err(Error::invalid("need epochs >= 1 and warmup epochs <= epochs"));
        }
        if !(t.learning_rate > 0.0 && t.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer sizes must be positive"));
        }
        unit_open("tau_s", self.selection.tau_s)?;
        unit_open("tau_h", self.selection.tau_h)?;
        if self.margin.scale == crate::margin::MarginScale::Probability {
            unit_open("tau_p", self.margin.tau_p)?;
        }
        if !(0.0..1.0).contains(&self.relabel.epsilon) {
            return Err(Error::invalid("epsilon must lie in [0, 1)"));
        }
        if !(self.relabel.tau > 0.0 && self.relabel.tau <= 1.0) {
            return Err(Error::invalid("sharpening temperature must lie in (0, 1]"));
        }
        let l = &self.loss;
        if l.lambda1 < 0.0 || l.lambda2 < 0.0 || l.entropy_weight < 0.0 {
            return Err(Error::invalid("loss weights must be nonnegative"));
        }
        self.augment.validate()
    }

    pub fn layer_sizes(&self, input: usize, classes: usize) -> Vec<usize> {
        let mut sizes = alloc::vec![input];
        sizes.extend_from_slice(&self.hidden);
        sizes.push(classes);
        sizes
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SetQuality {
    /// `None` when the set is empty.
    pub precision: Option<f64>,
    /// `None` when no sample truly belongs to the set.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl SetQuality {
    fn from_counts(hits: usize, selected: usize, relevant: usize) -> Self {
        let precision = (selected > 0).then(|| hits as f64 / selected as f64);
        let recall = (relevant > 0).then(|| hits as f64 / relevant as f64);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        SetQuality { precision, recall, f1 }
    }
}

/// Selection quality against hidden ground truth: the clean set against
/// truly clean samples, the OOD set against open-set noise, and the
/// in-distribution noisy sets against closed-set noise.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelectionQuality {
    pub clean: SetQuality,
    pub ood: SetQuality,
    pub id: SetQuality,
}

/// `statuses` is indexed by sample id.
pub fn selection_quality(partition: &Partition, statuses: &[NoiseStatus]) -> SelectionQuality {
    let ids = || {
        Assignment::ALL
            .iter()
            .flat_map(move |&a| partition.set(a).iter().copied())
    };
    let relevant = |s: NoiseStatus| ids().filter(|&i| statuses[i] == s).count();
    let hits = |set: &[usize], s: NoiseStatus| set.iter().filter(|&&i| statuses[i] == s).count();
    let id_hits = hits(&partition.id_high, NoiseStatus::ClosedNoise) + hits(&partition.id_rest, NoiseStatus::ClosedNoise);
    SelectionQuality {
        clean: SetQuality::from_counts(
            hits(&partition.clean, NoiseStatus::Clean),
            partition.clean.len(),
            relevant(NoiseStatus::Clean),
        ),
        ood: SetQuality::from_counts(
            hits(&partition.ood, NoiseStatus::OpenNoise),
            partition.ood.len(),
            relevant(NoiseStatus::OpenNoise),
        ),
        id: SetQuality::from_counts(
            id_hits,
            partition.id_high.len() + partition.id_rest.len(),
            relevant(NoiseStatus::ClosedNoise),
        ),
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartitionCounts {
    pub clean: usize,
    pub id_high: usize,
    pub id_rest: usize,
    pub ood: usize,
}

impl PartitionCounts {
    pub fn of(p: &Partition) -> Self {
        PartitionCounts {
            clean: p.clean.len(),
            id_high: p.id_high.len(),
            id_rest: p.id_rest.len(),
            ood: p.ood.len(),
        }
    }

    pub fn total(&self) -> usize {
        self.clean + self.id_high + self.id_rest + self.ood
    }
}

/// One sample's selection outcome, for audit dumps.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleAudit {
    pub id: usize,
    pub stats: SampleStats,
    pub assignment: Assignment,
    /// The target the sample was trained toward, if any.
    pub target: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub warmup: bool,
    pub counts: PartitionCounts,
    pub losses: LossBreakdown,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    pub quality: SelectionQuality,
    pub partition: Partition,
    /// Filled only when auditing is enabled.
    pub audit: Vec<SampleAudit>,
}

pub fn accuracy(model: &Mlp, dataset: &LabeledDataset) -> Result<f64> {
    if dataset.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for s in &dataset.samples {
        if argmax(&model.forward(&s.features)?.probs) == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Mean test accuracy over the last ten epochs, or over all epochs when
/// fewer than ten carry a test accuracy.
pub fn last10_mean(history: &[EpochRecord]) -> Option<f64> {
    let accs: Vec<f64> = history.iter().filter_map(|r| r.test_acc).collect();
    if accs.is_empty() {
        return None;
    }
    let tail = &accs[accs.len().saturating_sub(10)..];
    Some(tail.iter().sum::<f64>() / tail.len() as f64)
}

pub struct Trainer<'a> {
    config: ExperimentConfig,
    train: &'a LabeledDataset,
    test: Option<&'a LabeledDataset>,
    model: Mlp,
    optimizer: Optimizer,
    policy: AugmentPolicy,
    epoch: usize,
    audit: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: ExperimentConfig,
        train: &'a LabeledDataset,
        test: Option<&'a LabeledDataset>,
    ) -> Result<Self> {
        config.validate()?;
        train.validate()?;
        if train.is_empty() {
            return Err(Error::invalid("training set is empty"));
        }
        if let Some(t) = test {
            if t.classes != train.classes || t.dim != train.dim {
                return Err(Error::invalid("train and test splits disagree on classes or dimension"));
            }
        }
        let model = Mlp::new(&config.layer_sizes(train.dim, train.classes), config.train.seed)?;
        let optimizer = Optimizer::new(config.train.update_rule, &model);
        let policy = AugmentPolicy {
            seed: seed::derive(config.train.seed, &[STREAM_AUGMENT, config.augment.seed]),
            ..config.augment
        };
        Ok(Trainer {
            config,
            train,
            test,
            model,
            optimizer,
            policy,
            epoch: 0,
            audit: false,
        })
    }

    /// Records per-sample statistics and targets in every epoch record.
    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn set_audit(&mut self, audit: bool) {
        self.audit = audit;
    }

    /// Scores every training sample with the current parameters and assigns
    /// it as the next epoch would, without updating anything. During
    /// training the parameters move between batches, so this is the
    /// partition of a frozen model rather than a replay.
    pub fn inspect(&self) -> Result<(Partition, Vec<SampleAudit>)> {
        let mut partition = Partition {
            epoch: self.epoch,
            ..Partition::default()
        };
        let mut audit = Vec::with_capacity(self.train.len());
        let plain = self.plain_ce();
        let classes = self.train.classes;
        let variant = self.config.train.variant;
        for (id, sample) in self.train.samples.iter().enumerate() {
            let pair = predict_two_views(&self.model, &self.policy, &sample.features, id, self.epoch)?;
            let stats = sample_stats(&pair, sample.label, self.config.selection_view, &self.config.margin)?;
            let assignment = if plain {
                Assignment::Clean
            } else {
                assign(&stats, &self.config)
            };
            let target = match self.role_for(assignment, sample.label, classes, &pair, plain, variant) {
                Role::Clean(t) | Role::IdHigh(t) => Some(t),
                _ => None,
            };
            partition.push(id, assignment);
            audit.push(SampleAudit {
                id,
                stats,
                assignment,
                target,
            });
        }
        Ok((partition, audit))
    }

    /// Continue from existing parameters and optimizer state.
    pub fn resume(mut self, model: Mlp, optimizer: Optimizer, epoch: usize) -> Result<Self> {
        model.validate()?;
        if model.sizes() != self.model.sizes() {
            return Err(Error::invalid("checkpoint layer sizes do not match the configuration"));
        }
        self.model = model;
        self.optimizer = optimizer;
        self.epoch = epoch;
        Ok(self)
    }

    pub fn model(&self) -> &Mlp {
        &self.model
    }

    pub fn optimizer(&self) -> &Optimizer {
        &self.optimizer
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.train.epochs
    }

    pub fn current_lr(&self) -> f64 {
        let t = &self.config.train;
        t.schedule.lr_at(t.learning_rate, self.epoch, t.epochs, t.warmup_epochs)
    }

    fn in_warmup(&self) -> bool {
        self.epoch < self.config.train.warmup_epochs
    }

    fn plain_ce(&self) -> bool {
        self.in_warmup() || self.config.train.variant == Variant::Standard
    }

    /// Runs the next epoch: warmup while `epoch < warmup_epochs`, the
    /// configured variant afterwards.
    pub fn step_epoch(&mut self) -> Result<EpochRecord> {
        let epoch = self.epoch;
        let lr = self.current_lr();
        let n = self.train.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::stream(self.config.train.seed, &[STREAM_SHUFFLE, epoch as u64]));

        let mut partition = Partition {
            epoch,
            ..Partition::default()
        };
        let mut losses = LossBreakdown::default();
        let mut audit = Vec::new();
        for batch in order.chunks(self.config.train.batch_size) {
            let b = self.train_batch(batch, lr, &mut partition, &mut audit)?;
            losses.accumulate(&b);
        }

        let statuses: Vec<NoiseStatus> = self.train.samples.iter().map(|s| s.status).collect();
        let record = EpochRecord {
            epoch,
            lr,
            warmup: self.in_warmup(),
            counts: PartitionCounts::of(&partition),
            losses,
            train_acc: accuracy(&self.model, self.train)?,
            test_acc: self.test.map(|t| accuracy(&self.model, t)).transpose()?,
            quality: selection_quality(&partition, &statuses),
            partition,
            audit,
        };
        self.epoch += 1;
        Ok(record)
    }

    fn train_batch(
        &mut self,
        ids: &[usize],
        lr: f64,
        partition: &mut Partition,
        audit: &mut Vec<SampleAudit>,
    ) -> Result<LossBreakdown> {
        let cfg = &self.config;
        let classes = self.train.classes;
        let variant = cfg.train.variant;
        let plain = self.plain_ce();

        let mut traces: Vec<(Trace, Trace)> = Vec::with_capacity(ids.len());
        let mut roles = Vec::with_capacity(ids.len());
        for &id in ids {
            let sample = &self.train.samples[id];
            let (weak, strong) = trace_two_views(&self.model, &self.policy, &sample.features, id, self.epoch)?;
            let pair = pair_from_traces(&weak, &strong);
            let stats = sample_stats(&pair, sample.label, cfg.selection_view, &cfg.margin)?;
            let assignment = if plain {
                Assignment::Clean
            } else {
                assign(&stats, cfg)
            };
            let role = self.role_for(assignment, sample.label, classes, &pair, plain, variant);
            partition.push(id, assignment);
            if self.audit {
                let target = match &role {
                    Role::Clean(t) | Role::IdHigh(t) => Some(t.clone()),
                    _ => None,
                };
                audit.push(SampleAudit {
                    id,
                    stats,
                    assignment,
                    target,
                });
            }
            roles.push(role);
            traces.push((weak, strong));
        }

        let weights = if plain {
            LossWeights {
                lambda1: 0.0,
                lambda2: 0.0,
                clean_mode: CleanEntropyMode::CeOnly,
                ..cfg.loss
            }
        } else {
            cfg.loss
        };
        let mut grads = Gradients::zeros_like(&self.model);
        let breakdown = evaluate_traces(&self.model, &traces, &roles, &weights, LossSelector::Total, Some(&mut grads))?;
        self.optimizer.apply(&mut self.model, &grads, lr)?;
        Ok(breakdown)
    }

    fn role_for(
        &self,
        assignment: Assignment,
        label: usize,
        classes: usize,
        pair: &PredictionPair,
        plain: bool,
        variant: Variant,
    ) -> Role {
        match assignment {
            Assignment::Clean if plain => Role::Clean(one_hot(label, classes)),
            Assignment::Clean => Role::Clean(smooth_labels(label, classes, self.config.relabel.epsilon).probs),
            Assignment::IdHigh if variant.relabels() => Role::IdHigh(pseudo_label(pair, &self.config.relabel).probs),
            Assignment::IdHigh | Assignment::IdRest => Role::IdRest,
            Assignment::Ood => Role::Ood,
        }
    }
}

/// Post-warmup set of one sample under the configured variant.
pub fn assign(stats: &SampleStats, config: &ExperimentConfig) -> Assignment {
    let variant = config.train.variant;
    if variant == Variant::Standard || !variant.uses_selection() {
        return Assignment::Clean;
    }
    let rule = if variant == Variant::NoRss {
        SelectionRule::SmallLoss
    } else {
        config.selection_rule
    };
    if is_clean(stats, &config.selection, rule) {
        Assignment::Clean
    } else if variant.uses_margin_module() {
        classify_noisy(stats, config.margin.tau_p, variant.filters())
    } else {
        Assignment::IdRest
    }
}

/// Scores and assigns a batch of paired predictions, as the trainer does
/// after warmup.
pub fn partition_batch(
    pairs: &[PredictionPair],
    labels: &[usize],
    config: &ExperimentConfig,
) -> Result<Vec<(SampleStats, Assignment)>> {
    if pairs.len() != labels.len() {
        return Err(Error::shape("batch labels", pairs.len(), labels.len()));
    }
    pairs
        .iter()
        .zip(labels)
        .map(|(pair, &label)| {
            let stats = sample_stats(pair, label, config.selection_view, &config.margin)?;
            Ok((stats, assign(&stats, config)))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub model: Mlp,
    pub optimizer: Optimizer,
    pub last10_mean: Option<f64>,
}

/// Runs `warmup_epochs` of plain cross-entropy on a fresh model and returns it.
pub fn warmup(config: &ExperimentConfig, train: &LabeledDataset) -> Result<Mlp> {
    let mut cfg = config.clone();
    cfg.train.epochs = cfg.train.warmup_epochs.max(1);
    let mut trainer = Trainer::new(cfg, train, None)?;
    for _ in 0..config.train.warmup_epochs {
        trainer.step_epoch()?;
    }
    Ok(trainer.model)
}

pub fn run_training(
    config: &ExperimentConfig,
    train: &LabeledDataset,
    test: Option<&LabeledDataset>,
) -> Result<TrainOutcome> {
    let mut trainer = Trainer::new(config.clone(), train, test)?;
    let mut history = Vec::with_capacity(config.train.epochs);
    while !trainer.is_finished() {
        history.push(trainer.step_epoch()?);
    }
    let last10 = last10_mean(&history);
    Ok(TrainOutcome {
        history,
        model: trainer.model,
        optimizer: trainer.optimizer,
        last10_mean: last10,
    })
}

