use olnl_core::noise::gen_blobs;
use olnl_core::trainer::{accuracy, last10_mean, warmup};
use olnl_core::*;

fn small_bench(rate: f64, seed: u64) -> (LabeledDataset, LabeledDataset) {
    let (mut bench, _) = mini_preset(rate, seed);
    bench.train_per_class = 40;
    bench.test_per_class = 10;
    bench.build().unwrap()
}

fn short_config(variant: Variant, seed: u64) -> ExperimentConfig {
    let (_, mut cfg) = mini_preset(0.2, seed);
    cfg.train.variant = variant;
    cfg.train.epochs = 14;
    cfg.train.warmup_epochs = 3;
    cfg.train.schedule = LrSchedule::proportional_linear(14);
    cfg
}

#[test]
fn warmup_of_zero_epochs_returns_the_initial_model() {
    let (train, _) = small_bench(0.2, 0);
    let mut cfg = short_config(Variant::Full, 5);
    cfg.train.warmup_epochs = 0;
    let sizes = cfg.layer_sizes(train.dim, train.classes);
    assert_eq!(warmup(&cfg, &train).unwrap(), Mlp::new(&sizes, 5).unwrap());
}

#[test]
fn warmup_separates_two_blobs_with_library_defaults() {
    let train = gen_blobs(2, 100, 16, 4.0, 3, Split::Train).unwrap();
    let cfg = ExperimentConfig::default();
    let a = warmup(&cfg, &train).unwrap();
    assert!(accuracy(&a, &train).unwrap() >= 0.95);
    assert_eq!(a, warmup(&cfg, &train).unwrap());
}

#[test]
fn reruns_are_bit_identical() {
    let (train, test) = small_bench(0.5, 1);
    for variant in [Variant::Full, Variant::NoMp, Variant::Standard] {
        let cfg = short_config(variant, 1);
        let a = run_training(&cfg, &train, Some(&test)).unwrap();
        let b = run_training(&cfg, &train, Some(&test)).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model, b.model);
        assert_eq!(a.optimizer, b.optimizer);
        assert_eq!(a.last10_mean.map(f64::to_bits), b.last10_mean.map(f64::to_bits));
    }
}

#[test]
fn warmup_rows_agree_across_variants() {
    let (train, test) = small_bench(0.2, 2);
    let base = run_training(&short_config(Variant::Standard, 2), &train, Some(&test)).unwrap();
    for variant in Variant::ABLATIONS {
        let other = run_training(&short_config(variant, 2), &train, Some(&test)).unwrap();
        assert_eq!(other.history[..3], base.history[..3], "{variant}");
        assert!(other.history[..3].iter().all(|r| r.warmup));
        assert!(!other.history[3].warmup);
    }
}

#[test]
fn history_shape_and_schedule() {
    let (train, test) = small_bench(0.2, 3);
    let cfg = short_config(Variant::Full, 3);
    let out = run_training(&cfg, &train, Some(&test)).unwrap();
    assert_eq!(out.history.len(), 14);
    for (e, r) in out.history.iter().enumerate() {
        assert_eq!(r.epoch, e);
        assert_eq!(r.lr, cfg.train.schedule.lr_at(cfg.train.learning_rate, e, 14, 3));
        assert_eq!(r.counts.total(), train.len());
        let ids: Vec<usize> = (0..train.len()).collect();
        assert!(r.partition.is_disjoint_cover(&ids));
    }
    let tail: Vec<f64> = out.history[4..].iter().map(|r| r.test_acc.unwrap()).collect();
    let mean = tail.iter().sum::<f64>() / 10.0;
    assert_eq!(out.last10_mean, Some(mean));
    assert_eq!(last10_mean(&out.history), Some(mean));
}

#[test]
fn epochs_equal_to_warmup_give_a_pure_warmup_history() {
    let (train, test) = small_bench(0.2, 4);
    let mut cfg = short_config(Variant::Full, 4);
    cfg.train.epochs = 3;
    let out = run_training(&cfg, &train, Some(&test)).unwrap();
    assert_eq!(out.history.len(), 3);
    assert!(out.history.iter().all(|r| r.warmup && r.counts.clean == train.len()));
}

#[test]
fn warmup_longer_than_training_is_rejected() {
    let (train, _) = small_bench(0.2, 4);
    let mut cfg = short_config(Variant::Full, 4);
    cfg.train.warmup_epochs = 15;
    assert!(matches!(Trainer::new(cfg, &train, None), Err(Error::InvalidConfig(_))));
}

#[test]
fn standard_trains_everything_as_clean_with_plain_ce() {
    let (train, test) = small_bench(0.5, 5);
    let out = run_training(&short_config(Variant::Standard, 5), &train, Some(&test)).unwrap();
    for r in &out.history {
        assert_eq!(r.counts.clean, train.len());
        assert_eq!(r.losses.noisy, 0.0);
        assert_eq!(r.losses.total, r.losses.clean);
    }
}

#[test]
fn ablations_route_samples_as_defined() {
    let (train, test) = small_bench(0.5, 6);
    let run = |v| run_training(&short_config(v, 6), &train, Some(&test)).unwrap();
    let after = |o: &TrainOutcome| o.history[3..].to_vec();

    for r in after(&run(Variant::NoMgm)) {
        assert_eq!((r.counts.id_high, r.counts.ood), (0, 0));
        assert_eq!(r.losses.noisy_count, 0);
    }
    for r in after(&run(Variant::NoBoth)) {
        assert_eq!(r.counts.clean, train.len());
    }
    for r in after(&run(Variant::NoSsl)) {
        assert_eq!(r.losses.noisy_count, 0);
    }
    for r in after(&run(Variant::NoMv)) {
        assert_eq!(r.counts.ood, 0);
    }
    for r in after(&run(Variant::NoMp)) {
        assert_eq!(r.counts.id_rest, 0);
    }
    let full = run(Variant::Full);
    assert_eq!(run(Variant::NoRss).history, full.history);
    assert!(after(&full).iter().any(|r| r.counts.clean < train.len()));
}

#[test]
fn confident_correct_predictions_are_all_clean() {
    let cfg = short_config(Variant::Full, 0);
    let pairs: Vec<PredictionPair> = (0..8)
        .map(|k| {
            let mut s = vec![-6.0; 8];
            s[k] = 9.0;
            PredictionPair::from_scores(s.clone(), s)
        })
        .collect();
    let labels: Vec<usize> = (0..8).collect();
    let out = partition_batch(&pairs, &labels, &cfg).unwrap();
    assert!(out.iter().all(|(st, a)| *a == Assignment::Clean && st.clean_prob > 0.99));
}

#[test]
fn clean_data_is_not_hurt() {
    let (mut bench, _) = mini_preset(0.0, 7);
    bench.noise.open_set = false;
    bench.train_per_class = 60;
    bench.test_per_class = 30;
    let (train, test) = bench.build().unwrap();
    let acc = |v| {
        let mut cfg = mini_preset(0.0, 7).1;
        cfg.train.variant = v;
        cfg.train.epochs = 40;
        cfg.train.schedule = LrSchedule::proportional_linear(40);
        run_training(&cfg, &train, Some(&test)).unwrap().last10_mean.unwrap()
    };
    let (full, standard) = (acc(Variant::Full), acc(Variant::Standard));
    assert!(full >= standard - 0.02, "full {full} vs standard {standard}");
}

#[test]
fn selection_quality_examples() {
    use olnl_core::trainer::selection_quality;
    let statuses = [
        NoiseStatus::Clean,
        NoiseStatus::Clean,
        NoiseStatus::ClosedNoise,
        NoiseStatus::OpenNoise,
    ];
    let exact = Partition { epoch: 0, clean: vec![0, 1], id_high: vec![2], id_rest: vec![], ood: vec![3] };
    let q = selection_quality(&exact, &statuses);
    for set in [q.clean, q.ood, q.id] {
        assert_eq!((set.precision, set.recall), (Some(1.0), Some(1.0)));
    }

    let empty = Partition { epoch: 0, clean: vec![], id_high: vec![0, 1, 2], id_rest: vec![], ood: vec![3] };
    let q = selection_quality(&empty, &statuses);
    assert_eq!((q.clean.precision, q.clean.recall), (None, Some(0.0)));

    // random assignment on a half-clean dataset
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let n = 20_000;
    let statuses: Vec<NoiseStatus> =
        (0..n).map(|i| if i % 2 == 0 { NoiseStatus::Clean } else { NoiseStatus::ClosedNoise }).collect();
    let mut p = Partition::default();
    for i in 0..n {
        p.push(i, Assignment::ALL[rng.random_range(0..4)]);
    }
    let precision = selection_quality(&p, &statuses).clean.precision.unwrap();
    assert!((precision - 0.5).abs() <= 0.05, "{precision}");
}
