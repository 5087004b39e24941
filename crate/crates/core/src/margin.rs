//! Margin-guided split of the noisy set. Samples whose weak and strong views
//! disagree on the predicted class are treated as out-of-distribution; the
//! remaining in-distribution samples are ranked by their averaged prediction
//! margin and the confident ones are kept for relabeling.

use alloc::vec::Vec;

use crate::augment::PredictionPair;
use crate::math::{argmax, mean_of};
use crate::selection::SampleStats;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginScale {
    #[default]
    Probability,
    RawScore,
}

/// Class the margin is measured against.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginReference {
    /// Argmax of the two-view mean prediction.
    #[default]
    MeanPrediction,
    AnnotatedLabel,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginConfig {
    pub tau_p: f64,
    pub scale: MarginScale,
    pub reference: MarginReference,
}

impl Default for MarginConfig {
    fn default() -> Self {
        MarginConfig {
            tau_p: 0.9,
            scale: MarginScale::Probability,
            reference: MarginReference::MeanPrediction,
        }
    }
}

/// Which of the two margin functions are active. Turning one off is an
/// ablation: without disagreement nothing is flagged out-of-distribution,
/// without the margin every in-distribution sample counts as confident.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisyFilters {
    pub disagreement: bool,
    pub margin: bool,
}

impl Default for NoisyFilters {
    fn default() -> Self {
        NoisyFilters {
            disagreement: true,
            margin: true,
        }
    }
}

pub fn view_disagreement(pair: &PredictionPair) -> bool {
    argmax(&pair.probs_weak) != argmax(&pair.probs_strong)
}

fn view_margin(values: &[f64], reference: usize) -> f64 {
    let best_other = values
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != reference)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    values[reference] - best_other
}

pub fn reference_class(pair: &PredictionPair, config: &MarginConfig, label: usize) -> usize {
    match config.reference {
        MarginReference::MeanPrediction => argmax(&mean_of(&pair.probs_weak, &pair.probs_strong)),
        MarginReference::AnnotatedLabel => label,
    }
}

/// Averaged two-view margin of the reference class over the best other class.
pub fn prediction_margin(pair: &PredictionPair, config: &MarginConfig, label: usize) -> f64 {
    let reference = reference_class(pair, config, label);
    let (weak, strong) = match config.scale {
        MarginScale::Probability => (&pair.probs_weak, &pair.probs_strong),
        MarginScale::RawScore => (&pair.scores_weak, &pair.scores_strong),
    };
    0.5 * (view_margin(weak, reference) + view_margin(strong, reference))
}

/// Batch positions of the noisy set split three ways.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoisySplit {
    pub ood: Vec<usize>,
    pub id_high: Vec<usize>,
    pub id_rest: Vec<usize>,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assignment {
    Clean,
    IdHigh,
    IdRest,
    Ood,
}

impl Assignment {
    pub const ALL: [Assignment; 4] = [
        Assignment::Clean,
        Assignment::IdHigh,
        Assignment::IdRest,
        Assignment::Ood,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Assignment::Clean => "clean",
            Assignment::IdHigh => "id-high",
            Assignment::IdRest => "id-rest",
            Assignment::Ood => "ood",
        }
    }
}

pub fn classify_noisy(stats: &SampleStats, tau_p: f64, filters: NoisyFilters) -> Assignment {
    if filters.disagreement && stats.view_disagreement {
        Assignment::Ood
    } else if !filters.margin || stats.margin > tau_p {
        Assignment::IdHigh
    } else {
        Assignment::IdRest
    }
}

/// Splits the noisy positions using precomputed statistics.
pub fn split_noisy(
    noisy: &[usize],
    stats: &[SampleStats],
    tau_p: f64,
    filters: NoisyFilters,
) -> NoisySplit {
    let mut split = NoisySplit::default();
    for &i in noisy {
        match classify_noisy(&stats[i], tau_p, filters) {
            Assignment::Ood => split.ood.push(i),
            Assignment::IdHigh => split.id_high.push(i),
            _ => split.id_rest.push(i),
        }
    }
    split
}

/// Splits the noisy positions straight from the paired predictions.
/// `pairs` and `labels` are indexed by batch position.
pub fn partition_noisy(
    noisy: &[usize],
    pairs: &[PredictionPair],
    labels: &[usize],
    config: &MarginConfig,
    filters: NoisyFilters,
) -> NoisySplit {
    let mut split = NoisySplit::default();
    for &i in noisy {
        let disagree = view_disagreement(&pairs[i]);
        if filters.disagreement && disagree {
            split.ood.push(i);
        } else if !filters.margin || prediction_margin(&pairs[i], config, labels[i]) > config.tau_p {
            split.id_high.push(i);
        } else {
            split.id_rest.push(i);
        }
    }
    split
}

/// Four-way assignment of one batch, by sample id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Partition {
    pub epoch: usize,
    pub clean: Vec<usize>,
    pub id_high: Vec<usize>,
    pub id_rest: Vec<usize>,
    pub ood: Vec<usize>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.clean.len() + self.id_high.len() + self.id_rest.len() + self.ood.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, id: usize, assignment: Assignment) {
        match assignment {
            Assignment::Clean => self.clean.push(id),
            Assignment::IdHigh => self.id_high.push(id),
            Assignment::IdRest => self.id_rest.push(id),
            Assignment::Ood => self.ood.push(id),
        }
    }

    pub fn set(&self, assignment: Assignment) -> &[usize] {
        match assignment {
            Assignment::Clean => &self.clean,
            Assignment::IdHigh => &self.id_high,
            Assignment::IdRest => &self.id_rest,
            Assignment::Ood => &self.ood,
        }
    }

    pub fn extend(&mut self, other: &Partition) {
        self.clean.extend_from_slice(&other.clean);
        self.id_high.extend_from_slice(&other.id_high);
        self.id_rest.extend_from_slice(&other.id_rest);
        self.ood.extend_from_slice(&other.ood);
    }

    /// True when the four sets are pairwise disjoint and cover exactly `ids`.
    pub fn is_disjoint_cover(&self, ids: &[usize]) -> bool {
        let mut all: Vec<usize> = Assignment::ALL
            .iter()
            .flat_map(|&a| self.set(a).iter().copied())
            .collect();
        let mut expected = ids.to_vec();
        all.sort_unstable();
        expected.sort_unstable();
        all == expected && all.windows(2).all(|w| w[0] != w[1])
    }
}
