//! Training targets: smoothed annotated labels for clean samples and
//! sharpened two-view pseudo-labels for confident in-distribution samples.

use alloc::vec::Vec;

use crate::augment::PredictionPair;

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelabelConfig {
    /// Label smoothing mass moved off the annotated class.
    pub epsilon: f64,
    /// Sharpening temperature.
    pub tau: f64,
    /// Average the views first, then sharpen. Otherwise sharpen each view
    /// and average the sharpened vectors.
    pub sharpen_after_mean: bool,
}

impl Default for RelabelConfig {
    fn default() -> Self {
        RelabelConfig {
            epsilon: 0.1,
            tau: 0.5,
            sharpen_after_mean: true,
        }
    }
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetOrigin {
    SmoothedAnnotated,
    Pseudo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetDistribution {
    pub probs: Vec<f64>,
    pub origin: TargetOrigin,
}

pub fn smooth_labels(label: usize, classes: usize, epsilon: f64) -> TargetDistribution {
    let off = epsilon / (classes - 1) as f64;
    let mut probs = alloc::vec![off; classes];
    probs[label] = 1.0 - epsilon;
    TargetDistribution {
        probs,
        origin: TargetOrigin::SmoothedAnnotated,
    }
}

/// `p^(1/tau)` renormalized. Computed in log space relative to the largest
/// entry so tiny temperatures do not underflow to an all-zero vector.
pub fn sharpen(p: &[f64], tau: f64) -> Vec<f64> {
    if tau == 1.0 {
        return p.to_vec();
    }
    let max = p.iter().copied().fold(0.0, f64::max);
    let powered: Vec<f64> = p
        .iter()
        .map(|&x| {
            if x <= 0.0 {
                0.0
            } else {
                libm::exp(libm::log(x / max) / tau)
            }
        })
        .collect();
    let total: f64 = powered.iter().sum();
    powered.into_iter().map(|x| x / total).collect()
}

pub fn pseudo_label(pair: &PredictionPair, config: &RelabelConfig) -> TargetDistribution {
    let probs = if config.sharpen_after_mean {
        sharpen(&pair.mean_probs(), config.tau)
    } else {
        let w = sharpen(&pair.probs_weak, config.tau);
        let s = sharpen(&pair.probs_strong, config.tau);
        crate::math::mean_of(&w, &s)
    };
    TargetDistribution {
        probs,
        origin: TargetOrigin::Pseudo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn smoothing_examples() {
        let t = smooth_labels(0, 5, 0.1);
        assert!(close(&t.probs, &[0.9, 0.025, 0.025, 0.025, 0.025], 1e-15));
        assert_eq!(smooth_labels(2, 4, 0.0).probs, vec![0.0, 0.0, 1.0, 0.0]);
        assert!(close(&smooth_labels(1, 2, 0.2).probs, &[0.2, 0.8], 1e-15));
    }

    #[test]
    fn sharpen_examples() {
        assert_eq!(sharpen(&[0.3, 0.7], 1.0), vec![0.3, 0.7]);
        // (0.64, 0.04) / 0.68
        assert!(close(&sharpen(&[0.8, 0.2], 0.5), &[0.941_176_470_588_235_3, 0.058_823_529_411_764_7], 1e-12));
        assert!(close(&sharpen(&[0.25; 4], 0.3), &[0.25; 4], 1e-15));
    }

    #[test]
    fn sharpen_survives_tiny_temperature() {
        let out = sharpen(&[1e-3, 2e-3, 5e-4], 1e-3);
        assert!(close(&out, &[0.0, 1.0, 0.0], 1e-12));
    }

    #[test]
    fn pseudo_label_examples() {
        let p = vec![0.3, 0.5, 0.2];
        let cfg = RelabelConfig { tau: 1.0, ..RelabelConfig::default() };
        let same = PredictionPair::from_probs(p.clone(), p.clone());
        assert!(close(&pseudo_label(&same, &cfg).probs, &p, 1e-15));

        let pair = PredictionPair::from_probs(vec![0.6, 0.4], vec![0.8, 0.2]);
        let mean = pseudo_label(&pair, &cfg);
        assert!(close(&mean.probs, &[0.7, 0.3], 1e-15));
        assert_eq!(mean.origin, TargetOrigin::Pseudo);

        let sharp = pseudo_label(&pair, &RelabelConfig::default());
        // (0.49, 0.09) / 0.58
        assert!(close(&sharp.probs, &[0.844_827_586_206_896_6, 0.155_172_413_793_103_4], 1e-12));
    }
}
