//! Weak and strong views of a feature vector, and the paired predictions
//! the selection and margin modules consume.

use alloc::vec::Vec;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::softmax;
use crate::model::{Mlp, Trace};
use crate::seed::{self, STREAM_AUGMENT};

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewKind {
    Weak,
    Strong,
}

impl ViewKind {
    fn tag(self) -> u64 {
        match self {
            ViewKind::Weak => 0,
            ViewKind::Strong => 1,
        }
    }
}

/// Weak view: additive Gaussian jitter. Strong view: larger jitter followed
/// by zeroing a fixed fraction of coordinates.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentPolicy {
    pub weak_sigma: f64,
    pub strong_sigma: f64,
    pub strong_dropout: f64,
    pub seed: u64,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            weak_sigma: 0.05,
            strong_sigma: 0.2,
            strong_dropout: 0.2,
            seed: 0,
        }
    }
}

impl AugmentPolicy {
    pub fn identity() -> Self {
        AugmentPolicy {
            weak_sigma: 0.0,
            strong_sigma: 0.0,
            strong_dropout: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weak_sigma >= 0.0 && self.strong_sigma >= self.weak_sigma) {
            return Err(Error::invalid("augmentation needs 0 <= weak_sigma <= strong_sigma"));
        }
        if !(0.0..1.0).contains(&self.strong_dropout) {
            return Err(Error::invalid("strong_dropout must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Number of coordinates the strong view zeroes for a `dim`-length input.
    pub fn dropped_coordinates(&self, dim: usize) -> usize {
        libm::floor(self.strong_dropout * dim as f64) as usize
    }

    /// Deterministic in `(self, sample, epoch, view)`.
    pub fn augment(&self, x: &[f64], sample: usize, epoch: usize, view: ViewKind) -> Vec<f64> {
        let sigma = match view {
            ViewKind::Weak => self.weak_sigma,
            ViewKind::Strong => self.strong_sigma,
        };
        let mut rng = seed::stream(
            self.seed,
            &[STREAM_AUGMENT, sample as u64, epoch as u64, view.tag()],
        );
        let mut out = x.to_vec();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
            out.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
        }
        if view == ViewKind::Strong {
            let drop = self.dropped_coordinates(x.len());
            if drop > 0 {
                for i in rand::seq::index::sample(&mut rng, x.len(), drop) {
                    out[i] = 0.0;
                }
            }
        }
        out
    }
}

/// Predictions for the weak and strong views of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionPair {
    pub scores_weak: Vec<f64>,
    pub scores_strong: Vec<f64>,
    pub probs_weak: Vec<f64>,
    pub probs_strong: Vec<f64>,
}

impl PredictionPair {
    pub fn from_scores(scores_weak: Vec<f64>, scores_strong: Vec<f64>) -> Self {
        let probs_weak = softmax(&scores_weak);
        let probs_strong = softmax(&scores_strong);
        PredictionPair {
            scores_weak,
            scores_strong,
            probs_weak,
            probs_strong,
        }
    }

    /// A pair given directly by probabilities; scores are their logarithms.
    pub fn from_probs(probs_weak: Vec<f64>, probs_strong: Vec<f64>) -> Self {
        let log = |p: &Vec<f64>| p.iter().map(|&x| libm::log(crate::math::clamp_prob(x))).collect();
        PredictionPair {
            scores_weak: log(&probs_weak),
            scores_strong: log(&probs_strong),
            probs_weak,
            probs_strong,
        }
    }

    pub fn classes(&self) -> usize {
        self.probs_weak.len()
    }

    pub fn mean_probs(&self) -> Vec<f64> {
        crate::math::mean_of(&self.probs_weak, &self.probs_strong)
    }
}

/// Forward traces for both views, kept for backpropagation.
pub fn trace_two_views(
    model: &Mlp,
    policy: &AugmentPolicy,
    x: &[f64],
    sample: usize,
    epoch: usize,
) -> Result<(Trace, Trace)> {
    let weak = model.trace(&policy.augment(x, sample, epoch, ViewKind::Weak))?;
    let strong = model.trace(&policy.augment(x, sample, epoch, ViewKind::Strong))?;
    Ok((weak, strong))
}

pub fn pair_from_traces(weak: &Trace, strong: &Trace) -> PredictionPair {
    PredictionPair {
        scores_weak: weak.scores().to_vec(),
        scores_strong: strong.scores().to_vec(),
        probs_weak: weak.probs.clone(),
        probs_strong: strong.probs.clone(),
    }
}

pub fn predict_two_views(
    model: &Mlp,
    policy: &AugmentPolicy,
    x: &[f64],
    sample: usize,
    epoch: usize,
) -> Result<PredictionPair> {
    let (weak, strong) = trace_two_views(model, policy, x, sample, epoch)?;
    Ok(pair_from_traces(&weak, &strong))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_policy_gives_equal_views() {
        let model = Mlp::new(&[5, 4, 3], 2).unwrap();
        let x = [0.3, -0.1, 2.0, 1.0, 0.0];
        let pair = predict_two_views(&model, &AugmentPolicy::identity(), &x, 4, 1).unwrap();
        assert_eq!(pair.probs_weak, pair.probs_strong);
    }

    #[test]
    fn repeated_calls_agree() {
        let model = Mlp::new(&[5, 4, 3], 2).unwrap();
        let policy = AugmentPolicy { seed: 11, ..AugmentPolicy::default() };
        let x = [0.3, -0.1, 2.0, 1.0, 0.0];
        let a = predict_two_views(&model, &policy, &x, 4, 1).unwrap();
        let b = predict_two_views(&model, &policy, &x, 4, 1).unwrap();
        assert_eq!(a, b);
        let c = predict_two_views(&model, &policy, &x, 4, 2).unwrap();
        assert_ne!(a, c, "views are resampled per epoch");
    }

    #[test]
    fn half_dropout_zeroes_five_of_ten() {
        let policy = AugmentPolicy {
            weak_sigma: 0.0,
            strong_sigma: 0.0,
            strong_dropout: 0.5,
            seed: 3,
        };
        let x = [1.0; 10];
        for sample in 0..20 {
            let v = policy.augment(&x, sample, 0, ViewKind::Strong);
            assert_eq!(v.iter().filter(|&&c| c == 0.0).count(), 5);
            let w = policy.augment(&x, sample, 0, ViewKind::Weak);
            assert!(w.iter().all(|&c| c == 1.0));
        }
    }

    #[test]
    fn rejects_inverted_sigmas() {
        let policy = AugmentPolicy {
            weak_sigma: 0.3,
            strong_sigma: 0.1,
            ..AugmentPolicy::default()
        };
        assert!(policy.validate().is_err());
        assert!(AugmentPolicy::default().validate().is_ok());
    }
}
