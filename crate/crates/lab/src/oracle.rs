//! Brute-force reference for the four-way partition, written as straight-line
//! code that shares nothing with the library's selection or margin modules.
//! [`check`] draws random two-view scores and diffs the two implementations.

use olnl_core::{
    partition_batch, Assignment, ExperimentConfig, MarginReference, MarginScale, PredictionPair, SelectionRule,
    SelectionView, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

/// Reference assignment of one sample from raw scores.
#[allow(clippy::needless_range_loop)]
pub fn reference_assignment(weak: &[f64], strong: &[f64], label: usize, cfg: &ExperimentConfig) -> Assignment {
    let variant = cfg.train.variant;
    if variant == Variant::Standard || variant == Variant::NoBoth {
        return Assignment::Clean;
    }
    let c = weak.len();

    let mut pw = vec![0.0; c];
    let mut ps = vec![0.0; c];
    let mut mw = f64::NEG_INFINITY;
    let mut ms = f64::NEG_INFINITY;
    for k in 0..c {
        if weak[k] > mw {
            mw = weak[k];
        }
        if strong[k] > ms {
            ms = strong[k];
        }
    }
    let mut zw = 0.0;
    let mut zs = 0.0;
    for k in 0..c {
        pw[k] = (weak[k] - mw).exp();
        ps[k] = (strong[k] - ms).exp();
        zw += pw[k];
        zs += ps[k];
    }
    for k in 0..c {
        pw[k] /= zw;
        ps[k] /= zs;
    }
    let mut mean = vec![0.0; c];
    for k in 0..c {
        mean[k] = 0.5 * (pw[k] + ps[k]);
    }

    let p: &[f64] = match cfg.selection_view {
        SelectionView::Weak => &pw,
        SelectionView::Mean => &mean,
    };

    // base-2 JS against the one-hot label, both sides floored at 1e-7
    let mut left = 0.0;
    let mut right = 0.0;
    for k in 0..c {
        let a = p[k].clamp(1e-7, 1.0);
        let b = if k == label { 1.0 } else { 1e-7 };
        let m = 0.5 * (a + b);
        left += a * (a / m).log2();
        right += b * (b / m).log2();
    }
    let d = (0.5 * left + 0.5 * right).clamp(0.0, 1.0);
    let clean_prob = 1.0 - d;
    let s = p[label];

    let union = variant != Variant::NoRss && cfg.selection_rule == SelectionRule::Union;
    if clean_prob > cfg.selection.tau_s || (union && s > cfg.selection.tau_h) {
        return Assignment::Clean;
    }
    if variant == Variant::NoMgm {
        return Assignment::IdRest;
    }

    let mut aw = 0;
    let mut as_ = 0;
    let mut am = 0;
    for k in 1..c {
        if pw[k] > pw[aw] {
            aw = k;
        }
        if ps[k] > ps[as_] {
            as_ = k;
        }
        if mean[k] > mean[am] {
            am = k;
        }
    }
    if variant != Variant::NoMv && aw != as_ {
        return Assignment::Ood;
    }
    if variant == Variant::NoMp {
        return Assignment::IdHigh;
    }

    let r = match cfg.margin.reference {
        MarginReference::MeanPrediction => am,
        MarginReference::AnnotatedLabel => label,
    };
    let (vw, vs): (&[f64], &[f64]) = match cfg.margin.scale {
        MarginScale::Probability => (&pw, &ps),
        MarginScale::RawScore => (weak, strong),
    };
    let mut ow = f64::NEG_INFINITY;
    let mut os = f64::NEG_INFINITY;
    for k in 0..c {
        if k != r {
            ow = ow.max(vw[k]);
            os = os.max(vs[k]);
        }
    }
    let margin = 0.5 * ((vw[r] - ow) + (vs[r] - os));
    if margin > cfg.margin.tau_p {
        Assignment::IdHigh
    } else {
        Assignment::IdRest
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OracleReport {
    pub samples: usize,
    pub configs: usize,
    pub mismatches: usize,
    /// Samples per set across all comparisons: clean, id-high, id-rest, ood.
    pub coverage: [usize; 4],
    /// First few disagreements, for diagnosis.
    pub examples: Vec<String>,
}

/// Configurations swept by the oracle: every variant under both selection
/// views, both selection rules, both margin references and both scales.
pub fn config_grid(base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let mut out = Vec::new();
    for variant in Variant::ALL {
        for view in [SelectionView::Weak, SelectionView::Mean] {
            for rule in [SelectionRule::Union, SelectionRule::SmallLoss] {
                for reference in [MarginReference::MeanPrediction, MarginReference::AnnotatedLabel] {
                    for scale in [MarginScale::Probability, MarginScale::RawScore] {
                        let mut c = base.clone();
                        c.train.variant = variant;
                        c.selection_view = view;
                        c.selection_rule = rule;
                        c.margin.reference = reference;
                        c.margin.scale = scale;
                        c.margin.tau_p = match scale {
                            MarginScale::Probability => 0.5,
                            MarginScale::RawScore => 2.0,
                        };
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

/// Random two-view scores: a mix of confident, ambiguous and view-flipping
/// samples so that every set is exercised.
fn draw(rng: &mut ChaCha8Rng, classes: usize) -> (Vec<f64>, Vec<f64>, usize) {
    let spread = [0.5, 2.0, 6.0, 12.0][rng.random_range(0..4)];
    let weak: Vec<f64> = (0..classes).map(|_| rng.random_range(-spread..spread)).collect();
    let jitter = [0.0, 0.3, 3.0][rng.random_range(0..3)];
    let strong: Vec<f64> = weak.iter().map(|w| w + rng.random_range(-1.0..1.0) * jitter).collect();
    let top = (0..classes).fold(0, |b, k| if weak[k] > weak[b] { k } else { b });
    let label = if rng.random_bool(0.6) { top } else { rng.random_range(0..classes) };
    (weak, strong, label)
}

pub fn check(samples: usize, seeds: &[u64], classes: usize) -> Result<OracleReport> {
    let grid = config_grid(&ExperimentConfig::default());
    let mut report = OracleReport { samples, configs: grid.len(), ..OracleReport::default() };
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<_> = (0..samples).map(|_| draw(&mut rng, classes)).collect();
        let pairs: Vec<PredictionPair> =
            draws.iter().map(|(w, s, _)| PredictionPair::from_scores(w.clone(), s.clone())).collect();
        let labels: Vec<usize> = draws.iter().map(|d| d.2).collect();
        for cfg in &grid {
            let lib = partition_batch(&pairs, &labels, cfg)?;
            for (i, (weak, strong, label)) in draws.iter().enumerate() {
                let want = reference_assignment(weak, strong, *label, cfg);
                let got = lib[i].1;
                report.coverage[Assignment::ALL.iter().position(|&a| a == want).expect("known set")] += 1;
                if want != got {
                    report.mismatches += 1;
                    if report.examples.len() < 5 {
                        report.examples.push(format!(
                            "seed {seed} sample {i} variant {}: oracle {} library {}",
                            cfg.train.variant,
                            want.name(),
                            got.name()
                        ));
                    }
                }
            }
        }
    }
    Ok(report)
}
