//! Small numeric helpers shared by the selection, relabel and loss code.

use alloc::vec::Vec;

/// Lower bound applied to every probability before a logarithm is taken.
pub const PROB_FLOOR: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0)
}

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| libm::exp(s - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Shannon entropy in nats over clamped probabilities.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter()
        .map(|&x| {
            let q = clamp_prob(x);
            q * libm::log(q)
        })
        .sum::<f64>()
}

/// Cross entropy `-sum t ln p` in nats, with `p` clamped.
pub fn cross_entropy(target: &[f64], p: &[f64]) -> f64 {
    -target
        .iter()
        .zip(p)
        .map(|(&t, &x)| t * libm::log(clamp_prob(x)))
        .sum::<f64>()
}

/// Chain rule through softmax: maps dL/dp to dL/dscores.
pub fn softmax_backward(probs: &[f64], dprobs: &[f64]) -> Vec<f64> {
    let dot: f64 = probs.iter().zip(dprobs).map(|(p, g)| p * g).sum();
    probs
        .iter()
        .zip(dprobs)
        .map(|(p, g)| p * (g - dot))
        .collect()
}

pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    let mut v = alloc::vec![0.0; classes];
    v[class] = 1.0;
    v
}

pub fn mean_of(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect()
}
