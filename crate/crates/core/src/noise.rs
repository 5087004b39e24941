//! Synthetic labeled data and label-noise injection.
//!
//! Closed-set noise resamples each label from row `y` of a row-stochastic
//! transition matrix. Open-set noise turns the last classes of a dataset into
//! out-of-distribution samples whose labels are drawn uniformly from the
//! remaining known classes. Every sample keeps its generating class and a
//! noise status so selection can be scored against ground truth.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seed::{self, STREAM_BLOB_MEANS, STREAM_BLOB_SAMPLES, STREAM_NOISE};

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseStatus {
    Clean,
    ClosedNoise,
    OpenNoise,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Annotated label, always inside the known label space.
    pub label: usize,
    /// Generating class. For open-noise samples this is `>= classes`.
    pub true_class: usize,
    pub status: NoiseStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub classes: usize,
    pub dim: usize,
    pub split: Split,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StatusCounts {
    pub clean: usize,
    pub closed: usize,
    pub open: usize,
}

impl StatusCounts {
    pub fn total(&self) -> usize {
        self.clean + self.closed + self.open
    }
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn status_counts(&self) -> StatusCounts {
        let mut counts = StatusCounts::default();
        for s in &self.samples {
            match s.status {
                NoiseStatus::Clean => counts.clean += 1,
                NoiseStatus::ClosedNoise => counts.closed += 1,
                NoiseStatus::OpenNoise => counts.open += 1,
            }
        }
        counts
    }

    /// Fraction of samples whose annotated label is wrong.
    pub fn noise_rate(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let c = self.status_counts();
        (c.closed + c.open) as f64 / self.samples.len() as f64
    }

    /// Checks labels, feature lengths and the status/label consistency rules.
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("a dataset needs at least two classes"));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.features.len() != self.dim {
                return Err(Error::shape("sample features", self.dim, s.features.len()));
            }
            if s.label >= self.classes {
                return Err(Error::invalid(alloc::format!(
                    "sample {i} has label {} outside {} classes",
                    s.label,
                    self.classes
                )));
            }
            let consistent = match s.status {
                NoiseStatus::Clean => s.true_class == s.label,
                NoiseStatus::ClosedNoise => s.true_class < self.classes && s.true_class != s.label,
                NoiseStatus::OpenNoise => s.true_class >= self.classes,
            };
            if !consistent {
                return Err(Error::invalid(alloc::format!(
                    "sample {i} status {:?} disagrees with label {} / true class {}",
                    s.status,
                    s.label,
                    s.true_class
                )));
            }
            if self.split == Split::Test && s.status != NoiseStatus::Clean {
                return Err(Error::invalid("test split must hold only clean samples"));
            }
        }
        Ok(())
    }
}

fn class_means(classes: usize, dim: usize, separation: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::stream(seed, &[STREAM_BLOB_MEANS]);
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(classes);
    for k in 0..classes {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        // orthogonalize while there is room so pairwise distances equal `separation`
        if k < dim {
            for d in &dirs {
                let dot: f64 = v.iter().zip(d).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(d).for_each(|(a, b)| *a -= dot * b);
            }
        }
        let norm = libm::sqrt(v.iter().map(|a| a * a).sum());
        v.iter_mut().for_each(|a| *a /= norm);
        dirs.push(v);
    }
    let radius = separation / core::f64::consts::SQRT_2;
    dirs.into_iter()
        .map(|d| d.into_iter().map(|a| a * radius).collect())
        .collect()
}

/// Isotropic unit-variance Gaussian clusters. Class means depend only on
/// `(classes, dim, separation, seed)`, so the train and test splits of one
/// seed share them; the draws themselves also depend on the split.
pub fn gen_blobs(
    classes: usize,
    per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
    split: Split,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::invalid("gen_blobs needs at least two classes"));
    }
    if separation.is_nan() || separation <= 0.0 || dim == 0 {
        return Err(Error::invalid("gen_blobs needs separation > 0 and dim > 0"));
    }
    let means = class_means(classes, dim, separation, seed);
    let split_tag = match split {
        Split::Train => 0,
        Split::Test => 1,
    };
    let mut rng = seed::stream(seed, &[STREAM_BLOB_SAMPLES, split_tag]);
    let mut samples = Vec::with_capacity(classes * per_class);
    for (class, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            let features = mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + z
                })
                .collect();
            samples.push(Sample {
                features,
                label: class,
                true_class: class,
                status: NoiseStatus::Clean,
            });
        }
    }
    Ok(LabeledDataset {
        classes,
        dim,
        split,
        samples,
    })
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Off-diagonal mass spread evenly over the other classes.
    Symmetric,
    /// Class `i` flips to `(i + 1) mod C`.
    Asymmetric,
}

#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub closed_rate: f64,
    pub open_set: bool,
    pub open_fraction: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            kind: NoiseKind::Symmetric,
            closed_rate: 0.0,
            open_set: false,
            open_fraction: 0.2,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// Expected fraction of wrong training labels.
    pub fn overall_rate(&self) -> f64 {
        if self.open_set {
            self.open_fraction + (1.0 - self.open_fraction) * self.closed_rate
        } else {
            self.closed_rate
        }
    }

    /// `Q[i][j] = Pr[annotated = j | true = i]` over `classes` known classes.
    pub fn transition_matrix(&self, classes: usize) -> Vec<Vec<f64>> {
        let n = self.closed_rate;
        (0..classes)
            .map(|i| {
                (0..classes)
                    .map(|j| match self.kind {
                        _ if i == j => 1.0 - n,
                        NoiseKind::Symmetric => n / (classes - 1) as f64,
                        NoiseKind::Asymmetric if j == (i + 1) % classes => n,
                        NoiseKind::Asymmetric => 0.0,
                    })
                    .collect()
            })
            .collect()
    }

    fn check_rate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.closed_rate) {
            return Err(Error::invalid("closed noise rate must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn check_row_stochastic(q: &[Vec<f64>], classes: usize) -> Result<()> {
    if q.len() != classes {
        return Err(Error::shape("transition matrix rows", classes, q.len()));
    }
    for (row, r) in q.iter().enumerate() {
        if r.len() != classes {
            return Err(Error::shape("transition matrix columns", classes, r.len()));
        }
        let sum: f64 = r.iter().sum();
        if r.iter().any(|&v| v.is_nan() || v < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::NotRowStochastic { row, sum });
        }
    }
    Ok(())
}

/// Resamples every non-open label from row `true_class` of `q`.
pub fn inject_with_matrix(
    dataset: &LabeledDataset,
    q: &[Vec<f64>],
    seed: u64,
) -> Result<LabeledDataset> {
    check_row_stochastic(q, dataset.classes)?;
    let mut rng = seed::stream(seed, &[STREAM_NOISE, 0]);
    let mut out = dataset.clone();
    for s in out.samples.iter_mut() {
        if s.status == NoiseStatus::OpenNoise {
            continue;
        }
        let row = &q[s.true_class];
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut label = row.len() - 1;
        for (j, &pj) in row.iter().enumerate() {
            acc += pj;
            if u < acc {
                label = j;
                break;
            }
        }
        // never land on a zero-probability class through rounding
        while row[label] == 0.0 && label > 0 {
            label -= 1;
        }
        s.label = label;
        s.status = if label == s.true_class {
            NoiseStatus::Clean
        } else {
            NoiseStatus::ClosedNoise
        };
    }
    Ok(out)
}

pub fn inject_closed_noise(dataset: &LabeledDataset, spec: &NoiseSpec) -> Result<LabeledDataset> {
    if spec.open_set {
        return Err(Error::invalid(
            "inject_closed_noise takes a closed-set spec; use build_openset_dataset",
        ));
    }
    spec.check_rate()?;
    if dataset.split == Split::Test {
        return Ok(dataset.clone());
    }
    inject_with_matrix(dataset, &spec.transition_matrix(dataset.classes), spec.seed)
}

/// Number of trailing classes that become out-of-distribution.
pub fn ood_class_count(total_classes: usize, open_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&open_fraction) {
        return Err(Error::invalid("open fraction must lie in [0, 1)"));
    }
    let exact = open_fraction * total_classes as f64;
    let rounded = libm::round(exact);
    if (exact - rounded).abs() > 1e-9 {
        return Err(Error::invalid(alloc::format!(
            "open fraction {open_fraction} of {total_classes} classes is not a whole number of classes"
        )));
    }
    let ood = rounded as usize;
    if total_classes - ood < 2 {
        return Err(Error::invalid("open-set split must leave at least two known classes"));
    }
    Ok(ood)
}

/// Turns the last classes into open-set noise and applies closed noise to
/// the rest. On the test split the out-of-distribution classes are dropped
/// and no noise is added.
pub fn build_openset_dataset(dataset: &LabeledDataset, spec: &NoiseSpec) -> Result<LabeledDataset> {
    if !spec.open_set {
        return Err(Error::invalid("build_openset_dataset needs an open-set spec"));
    }
    spec.check_rate()?;
    let ood = ood_class_count(dataset.classes, spec.open_fraction)?;
    let known = dataset.classes - ood;

    if dataset.split == Split::Test {
        let samples = dataset
            .samples
            .iter()
            .filter(|s| s.true_class < known)
            .cloned()
            .collect();
        return Ok(LabeledDataset {
            classes: known,
            samples,
            ..dataset.clone()
        });
    }

    let mut rng = seed::stream(spec.seed, &[STREAM_NOISE, 1]);
    let mut relabeled = dataset.clone();
    relabeled.classes = known;
    for s in relabeled.samples.iter_mut() {
        if s.true_class >= known {
            s.label = rng.random_range(0..known);
            s.status = NoiseStatus::OpenNoise;
        }
    }
    let q = spec.transition_matrix(known);
    inject_with_matrix(&relabeled, &q, spec.seed)
}

/// Train and test splits for a blob benchmark with optional open-set noise.
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    /// Classes before any are turned into out-of-distribution data.
    pub total_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    /// 8 known classes plus 2 out-of-distribution classes of 16-dim blobs.
    fn default() -> Self {
        BenchmarkSpec {
            total_classes: 10,
            train_per_class: 200,
            test_per_class: 50,
            dim: 16,
            separation: 4.0,
            noise: NoiseSpec {
                kind: NoiseKind::Symmetric,
                closed_rate: 0.2,
                open_set: true,
                open_fraction: 0.2,
                seed: 0,
            },
            seed: 0,
        }
    }
}

impl BenchmarkSpec {
    pub fn known_classes(&self) -> Result<usize> {
        if self.noise.open_set {
            Ok(self.total_classes - ood_class_count(self.total_classes, self.noise.open_fraction)?)
        } else {
            Ok(self.total_classes)
        }
    }

    pub fn build(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        let blobs = |per_class, split| {
            gen_blobs(self.total_classes, per_class, self.dim, self.separation, self.seed, split)
        };
        let train = blobs(self.train_per_class, Split::Train)?;
        let test = blobs(self.test_per_class, Split::Test)?;
        let corrupt = |d: &LabeledDataset| {
            if self.noise.open_set {
                build_openset_dataset(d, &self.noise)
            } else {
                inject_closed_noise(d, &self.noise)
            }
        };
        Ok((corrupt(&train)?, corrupt(&test)?))
    }
}
