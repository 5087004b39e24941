//! Robust sample selection: a sample is kept as clean when its prediction is
//! close to its one-hot label in base-2 Jensen-Shannon divergence, or when
//! the model is highly confident in the annotated class.

use alloc::vec::Vec;

use crate::augment::PredictionPair;
use crate::error::{Error, Result};
use crate::margin::{self, MarginConfig};
use crate::math::{clamp_prob, one_hot};

/// Per-sample selection quantities.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleStats {
    /// Base-2 JS divergence between prediction and one-hot label.
    pub divergence: f64,
    /// `1 - divergence`.
    pub clean_prob: f64,
    /// Predicted probability of the annotated class.
    pub confidence: f64,
    pub view_disagreement: bool,
    pub margin: f64,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionThresholds {
    /// Threshold on the clean probability.
    pub tau_s: f64,
    /// Threshold on the confidence score.
    pub tau_h: f64,
}

impl Default for SelectionThresholds {
    fn default() -> Self {
        SelectionThresholds {
            tau_s: 0.75,
            tau_h: 0.9,
        }
    }
}

/// Which prediction feeds the divergence and the confidence score.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionView {
    #[default]
    Weak,
    Mean,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionRule {
    /// Small-divergence set united with the high-confidence set.
    #[default]
    Union,
    /// Small-divergence set alone.
    SmallLoss,
}

/// Jensen-Shannon divergence with base-2 logarithms, over clamped inputs.
pub fn js_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape("js_divergence", p.len(), q.len()));
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let (a, b) = (clamp_prob(a), clamp_prob(b));
        let m = 0.5 * (a + b);
        kl_p += a * libm::log2(a / m);
        kl_q += b * libm::log2(b / m);
    }
    Ok((0.5 * kl_p + 0.5 * kl_q).clamp(0.0, 1.0))
}

pub fn confidence_score(probs: &[f64], label: usize) -> f64 {
    probs[label]
}

fn selection_probs(pair: &PredictionPair, view: SelectionView) -> Vec<f64> {
    match view {
        SelectionView::Weak => pair.probs_weak.clone(),
        SelectionView::Mean => pair.mean_probs(),
    }
}

pub fn sample_stats(
    pair: &PredictionPair,
    label: usize,
    view: SelectionView,
    margin_config: &MarginConfig,
) -> Result<SampleStats> {
    let classes = pair.classes();
    if label >= classes {
        return Err(Error::shape("annotated label", classes, label));
    }
    let probs = selection_probs(pair, view);
    let divergence = js_divergence(&probs, &one_hot(label, classes))?;
    Ok(SampleStats {
        divergence,
        clean_prob: 1.0 - divergence,
        confidence: confidence_score(&probs, label),
        view_disagreement: margin::view_disagreement(pair),
        margin: margin::prediction_margin(pair, margin_config, label),
    })
}

/// Positions in the batch, split into clean and noisy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CleanSplit {
    pub clean: Vec<usize>,
    pub noisy: Vec<usize>,
}

pub fn is_small_loss(stats: &SampleStats, thresholds: &SelectionThresholds) -> bool {
    stats.clean_prob > thresholds.tau_s
}

pub fn is_clean(stats: &SampleStats, thresholds: &SelectionThresholds, rule: SelectionRule) -> bool {
    is_small_loss(stats, thresholds)
        || (rule == SelectionRule::Union && stats.confidence > thresholds.tau_h)
}

pub fn partition_clean(
    stats: &[SampleStats],
    thresholds: &SelectionThresholds,
    rule: SelectionRule,
) -> CleanSplit {
    let mut split = CleanSplit::default();
    for (i, s) in stats.iter().enumerate() {
        if is_clean(s, thresholds, rule) {
            split.clean.push(i);
        } else {
            split.noisy.push(i);
        }
    }
    split
}
