use olnl_core::noise::{build_openset_dataset, gen_blobs, inject_closed_noise, inject_with_matrix};
use olnl_core::*;

const N: usize = 50_000;

fn corrupted_fraction(d: &LabeledDataset) -> f64 {
    d.samples.iter().filter(|s| s.label != s.true_class).count() as f64 / d.len() as f64
}

fn closed(kind: NoiseKind, rate: f64, seed: u64) -> NoiseSpec {
    NoiseSpec { kind, closed_rate: rate, open_set: false, open_fraction: 0.2, seed }
}

#[test]
fn closed_noise_rate_within_one_point_at_fifty_thousand() {
    let data = gen_blobs(10, N / 10, 4, 3.0, 1, Split::Train).unwrap();
    for kind in [NoiseKind::Symmetric, NoiseKind::Asymmetric] {
        for rate in [0.2, 0.5, 0.8] {
            let noisy = inject_closed_noise(&data, &closed(kind, rate, 9)).unwrap();
            let f = corrupted_fraction(&noisy);
            assert!((f - rate).abs() <= 0.01, "{kind:?} n_c={rate}: {f}");
            assert!((noisy.noise_rate() - f).abs() < 1e-12);
        }
    }
}

#[test]
fn open_set_rate_within_one_point_at_fifty_thousand() {
    let data = gen_blobs(10, N / 10, 4, 3.0, 2, Split::Train).unwrap();
    for rate in [0.2, 0.5, 0.8] {
        let spec = NoiseSpec { open_set: true, ..closed(NoiseKind::Symmetric, rate, 4) };
        let noisy = build_openset_dataset(&data, &spec).unwrap();
        let expected = 0.2 + 0.8 * rate;
        assert!((spec.overall_rate() - expected).abs() < 1e-12);
        let f = noisy.noise_rate();
        assert!((f - expected).abs() <= 0.01, "n_c={rate}: {f} vs {expected}");
        let counts = noisy.status_counts();
        assert_eq!(counts.total(), N);
        assert_eq!(counts.open, N / 5);
    }
}

#[test]
fn mean_rate_over_ten_seeds_is_tight() {
    let data = gen_blobs(10, 1000, 4, 3.0, 3, Split::Train).unwrap();
    let rates: Vec<f64> = (0..10)
        .map(|seed| corrupted_fraction(&inject_closed_noise(&data, &closed(NoiseKind::Symmetric, 0.4, seed)).unwrap()))
        .collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 0.4).abs() < 0.01, "{mean}");
}

#[test]
fn asymmetric_flips_follow_the_circular_shift() {
    let data = gen_blobs(10, 500, 4, 3.0, 5, Split::Train).unwrap();
    let noisy = inject_closed_noise(&data, &closed(NoiseKind::Asymmetric, 0.4, 1)).unwrap();
    let flipped: Vec<&Sample> = noisy.samples.iter().filter(|s| s.label != s.true_class).collect();
    assert!(!flipped.is_empty());
    assert!(flipped.iter().all(|s| s.label == (s.true_class + 1) % 10));
}

#[test]
fn zero_rate_leaves_labels_alone() {
    let data = gen_blobs(6, 50, 4, 3.0, 6, Split::Train).unwrap();
    let same = inject_closed_noise(&data, &closed(NoiseKind::Symmetric, 0.0, 2)).unwrap();
    assert_eq!(same, data);

    let spec = NoiseSpec { open_set: true, open_fraction: 0.5, ..closed(NoiseKind::Symmetric, 0.0, 2) };
    let open = build_openset_dataset(&data, &spec).unwrap();
    let counts = open.status_counts();
    assert_eq!((counts.closed, counts.open), (0, 150));
}

#[test]
fn closed_noise_preserves_features_and_label_space() {
    let data = gen_blobs(5, 40, 3, 2.0, 7, Split::Train).unwrap();
    let noisy = inject_closed_noise(&data, &closed(NoiseKind::Symmetric, 0.6, 3)).unwrap();
    assert_eq!(noisy.len(), data.len());
    assert_eq!(noisy.classes, data.classes);
    for (a, b) in noisy.samples.iter().zip(&data.samples) {
        assert_eq!(a.features, b.features);
        assert_eq!(a.true_class, b.true_class);
        assert!(a.label < noisy.classes);
    }
    noisy.validate().unwrap();
}

#[test]
fn open_noise_labels_stay_in_known_space() {
    let data = gen_blobs(10, 100, 12, 3.0, 8, Split::Train).unwrap();
    let spec = NoiseSpec { open_set: true, ..closed(NoiseKind::Symmetric, 0.3, 5) };
    let noisy = build_openset_dataset(&data, &spec).unwrap();
    assert_eq!(noisy.classes, 8);
    for s in &noisy.samples {
        assert!(s.label < 8);
        assert_eq!(s.status == NoiseStatus::OpenNoise, s.true_class >= 8);
    }
    // uniform relabeling reaches every known class
    let mut seen = [false; 8];
    noisy.samples.iter().filter(|s| s.status == NoiseStatus::OpenNoise).for_each(|s| seen[s.label] = true);
    assert!(seen.iter().all(|&b| b));

    let test = gen_blobs(10, 20, 12, 3.0, 8, Split::Test).unwrap();
    let test = build_openset_dataset(&test, &spec).unwrap();
    assert_eq!(test.len(), 160);
    assert!(test.samples.iter().all(|s| s.status == NoiseStatus::Clean && s.true_class < 8));
}

#[test]
fn rejected_inputs() {
    let data = gen_blobs(10, 10, 4, 3.0, 0, Split::Train).unwrap();
    let open = |f| NoiseSpec { open_set: true, open_fraction: f, ..closed(NoiseKind::Symmetric, 0.2, 0) };
    assert!(build_openset_dataset(&data, &open(1.0)).is_err());
    assert!(build_openset_dataset(&data, &open(0.25)).is_err());
    assert!(inject_closed_noise(&data, &closed(NoiseKind::Symmetric, 1.5, 0)).is_err());

    let mut q = NoiseSpec::default().transition_matrix(10);
    q[3][4] += 0.1;
    assert!(matches!(inject_with_matrix(&data, &q, 0), Err(Error::NotRowStochastic { row: 3, .. })));
    assert!(gen_blobs(1, 10, 2, 1.0, 0, Split::Train).is_err());
    assert!(gen_blobs(3, 10, 2, 0.0, 0, Split::Train).is_err());
}

#[test]
fn transition_rows_are_stochastic() {
    for kind in [NoiseKind::Symmetric, NoiseKind::Asymmetric] {
        for rate in [0.0, 0.3, 1.0] {
            let q = closed(kind, rate, 0).transition_matrix(7);
            for (i, row) in q.iter().enumerate() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!((row[i] - (1.0 - rate)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn blobs_are_sized_and_seeded() {
    let a = gen_blobs(8, 100, 6, 3.0, 11, Split::Train).unwrap();
    assert_eq!(a.len(), 800);
    assert_eq!(a, gen_blobs(8, 100, 6, 3.0, 11, Split::Train).unwrap());
    assert_ne!(a, gen_blobs(8, 100, 6, 3.0, 12, Split::Train).unwrap());
}

#[test]
fn two_far_blobs_are_linearly_separable() {
    let train = gen_blobs(2, 200, 4, 10.0, 21, Split::Train).unwrap();
    let test = gen_blobs(2, 200, 4, 10.0, 21, Split::Test).unwrap();
    let mut cfg = ExperimentConfig { hidden: vec![], ..ExperimentConfig::default() };
    cfg.train.variant = Variant::Standard;
    cfg.train.epochs = 10;
    cfg.train.warmup_epochs = 10;
    cfg.train.learning_rate = 0.01;
    let out = run_training(&cfg, &train, Some(&test)).unwrap();
    let last = out.history.last().unwrap();
    assert!(last.test_acc.unwrap() >= 0.99, "{:?}", last.test_acc);
    assert!(last.train_acc >= 0.99);
}
