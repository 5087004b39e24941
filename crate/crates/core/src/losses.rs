//! Loss terms and their gradients with respect to the model scores.
//!
//! All logarithms are natural and act on probabilities clamped to
//! `[PROB_FLOOR, 1]`. Where the clamp is active its derivative is zero, so
//! the returned gradients are exact derivatives of the clamped losses.

use alloc::string::ToString;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{clamp_prob, cross_entropy, entropy, mean_of, softmax_backward, PROB_FLOOR};

/// How the clean-set loss treats prediction entropy.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CleanEntropyMode {
    /// `CE(y, p) - H(p)`, the formula as written. Can be negative.
    #[default]
    Literal,
    /// `CE(y, p) + H(p)`.
    PlusEntropy,
    /// `CE(y, p)`.
    CeOnly,
}

/// Samples the consistency term sums over.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConsistencyScope {
    /// Every sample in the batch, including discarded ones.
    #[default]
    All,
    /// Only samples that receive a target (clean and confident ID).
    Retained,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the confident-ID pseudo-label loss.
    pub lambda1: f64,
    /// Weight of the consistency loss.
    pub lambda2: f64,
    /// Entropy weight inside the pseudo-label loss.
    pub entropy_weight: f64,
    pub clean_mode: CleanEntropyMode,
    pub consistency_scope: ConsistencyScope,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda1: 0.05,
            lambda2: 0.05,
            entropy_weight: 0.05,
            clean_mode: CleanEntropyMode::Literal,
            consistency_scope: ConsistencyScope::All,
        }
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub clean: f64,
    pub noisy: f64,
    pub consistency: f64,
    pub total: f64,
    pub clean_count: usize,
    pub noisy_count: usize,
    pub consistency_count: usize,
}

impl LossBreakdown {
    /// Adds another batch's terms, recomputing nothing.
    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.clean += other.clean;
        self.noisy += other.noisy;
        self.consistency += other.consistency;
        self.total += other.total;
        self.clean_count += other.clean_count;
        self.noisy_count += other.noisy_count;
        self.consistency_count += other.consistency_count;
    }
}

fn active(p: f64) -> f64 {
    if p >= PROB_FLOOR {
        1.0
    } else {
        0.0
    }
}

/// Clean-set loss of one sample and its derivative with respect to `p`.
pub fn clean_term(target: &[f64], p: &[f64], mode: CleanEntropyMode) -> (f64, Vec<f64>) {
    let ce = cross_entropy(target, p);
    let value = match mode {
        CleanEntropyMode::Literal => ce - entropy(p),
        CleanEntropyMode::PlusEntropy => ce + entropy(p),
        CleanEntropyMode::CeOnly => ce,
    };
    let grad = target
        .iter()
        .zip(p)
        .map(|(&t, &x)| {
            let q = clamp_prob(x);
            let dce = -t / q;
            let dneg_h = libm::log(q) + 1.0;
            let g = match mode {
                CleanEntropyMode::Literal => dce + dneg_h,
                CleanEntropyMode::PlusEntropy => dce - dneg_h,
                CleanEntropyMode::CeOnly => dce,
            };
            g * active(x)
        })
        .collect();
    (value, grad)
}

/// Pseudo-label loss of one sample, `CE(t, mean) + lambda * H(mean)`, with
/// derivatives with respect to the weak and strong probabilities.
pub fn noisy_term(
    target: &[f64],
    p_weak: &[f64],
    p_strong: &[f64],
    entropy_weight: f64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let mean = mean_of(p_weak, p_strong);
    let value = cross_entropy(target, &mean) + entropy_weight * entropy(&mean);
    let grad: Vec<f64> = target
        .iter()
        .zip(&mean)
        .map(|(&t, &m)| {
            let q = clamp_prob(m);
            0.5 * (-t / q - entropy_weight * (libm::log(q) + 1.0)) * active(m)
        })
        .collect();
    (value, grad.clone(), grad)
}

/// Symmetrized KL between the two views of one sample, with derivatives.
pub fn consistency_term(p_weak: &[f64], p_strong: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let mut value = 0.0;
    let mut gw = Vec::with_capacity(p_weak.len());
    let mut gs = Vec::with_capacity(p_weak.len());
    for (&x, &y) in p_weak.iter().zip(p_strong) {
        let (a, b) = (clamp_prob(x), clamp_prob(y));
        let log_ratio = libm::log(a) - libm::log(b);
        value += (a - b) * log_ratio;
        gw.push(0.5 * (log_ratio + (a - b) / a) * active(x));
        gs.push(0.5 * (-log_ratio + (b - a) / b) * active(y));
    }
    (0.5 * value, gw, gs)
}

pub fn loss_clean(targets: &[Vec<f64>], probs: &[Vec<f64>], mode: CleanEntropyMode) -> f64 {
    targets
        .iter()
        .zip(probs)
        .map(|(t, p)| clean_term(t, p, mode).0)
        .sum()
}

/// `pairs` holds `(weak, strong)` probability vectors.
pub fn loss_noisy(targets: &[Vec<f64>], pairs: &[(Vec<f64>, Vec<f64>)], entropy_weight: f64) -> f64 {
    targets
        .iter()
        .zip(pairs)
        .map(|(t, (w, s))| noisy_term(t, w, s, entropy_weight).0)
        .sum()
}

pub fn loss_consistency(pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    pairs.iter().map(|(w, s)| consistency_term(w, s).0).sum()
}

/// Combines the three terms. Fails naming the first non-finite one.
pub fn loss_total(clean: f64, noisy: f64, consistency: f64, weights: &LossWeights) -> Result<LossBreakdown> {
    for (name, v) in [("L_c", clean), ("L_n", noisy), ("L_cons", consistency)] {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: name.to_string(),
            });
        }
    }
    Ok(LossBreakdown {
        clean,
        noisy,
        consistency,
        total: clean + weights.lambda1 * noisy + weights.lambda2 * consistency,
        ..LossBreakdown::default()
    })
}

/// dL/dscores from dL/dprobs.
pub fn to_score_grad(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    softmax_backward(probs, dprobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn clean_examples() {
        let t = vec![0.7, 0.2, 0.1];
        assert!(clean_term(&t, &t, CleanEntropyMode::Literal).0.abs() < 1e-15);
        let (v, _) = clean_term(&[1.0, 0.0], &[0.9, 0.1], CleanEntropyMode::Literal);
        assert!((v - (-0.219_722_457_733_621_9)).abs() < 1e-12, "{v}");
        let (v, _) = clean_term(&[1.0, 0.0], &[0.9, 0.1], CleanEntropyMode::CeOnly);
        assert!((v - 0.105_360_515_657_826_3).abs() < 1e-12);
        let (v, _) = clean_term(&[1.0, 0.0], &[0.9, 0.1], CleanEntropyMode::PlusEntropy);
        assert!((v - (0.105_360_515_657_826_3 + 0.325_082_973_391_448_2)).abs() < 1e-12);
    }

    #[test]
    fn clean_empty_set_is_zero() {
        assert_eq!(loss_clean(&[], &[], CleanEntropyMode::Literal), 0.0);
        assert_eq!(loss_noisy(&[], &[], 0.05), 0.0);
    }

    #[test]
    fn noisy_examples() {
        let p = vec![0.9, 0.1];
        let (v, _, _) = noisy_term(&[1.0, 0.0], &p, &p, 0.0);
        assert!((v - 0.105_360_515_657_826_3).abs() < 1e-12);
        let (v, _, _) = noisy_term(&p, &p, &p, 0.0);
        assert!((v - 0.325_082_973_391_448_2).abs() < 1e-12);
        let (v, _, _) = noisy_term(&[1.0, 0.0], &p, &p, 0.05);
        assert!((v - 0.121_614_664_327_398_7).abs() < 1e-12, "{v}");
    }

    #[test]
    fn consistency_examples() {
        let (v, gw, gs) = consistency_term(&[0.3, 0.7], &[0.3, 0.7]);
        assert_eq!(v, 0.0);
        assert!(gw.iter().chain(&gs).all(|g| g.abs() < 1e-15));
        let (v, _, _) = consistency_term(&[0.75, 0.25], &[0.25, 0.75]);
        assert!((v - 0.549_306_144_334_054_8).abs() < 1e-12, "{v}");
        let (v, _, _) = consistency_term(&[1.0, 0.0], &[0.0, 1.0]);
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn total_examples() {
        let w = LossWeights::default();
        assert_eq!(loss_total(0.0, 0.0, 0.0, &w).unwrap().total, 0.0);
        assert!((loss_total(1.0, 2.0, 3.0, &w).unwrap().total - 1.25).abs() < 1e-15);
        let only_clean = LossWeights { lambda1: 0.0, lambda2: 0.0, ..w };
        assert_eq!(loss_total(1.7, 2.0, 3.0, &only_clean).unwrap().total, 1.7);
    }

    #[test]
    fn total_names_the_bad_term() {
        let err = loss_total(1.0, f64::NAN, 0.0, &LossWeights::default()).unwrap_err();
        assert_eq!(err, Error::NonFinite { what: "L_n".into() });
    }
}
