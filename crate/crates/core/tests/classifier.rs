use rand::Rng as _;

use socketvib::lstm::{
    evaluate, hyper_search, predict, train, ModelParams, NetworkSpec, SearchSpace, TrainConfig, TrialStatus,
};
use socketvib::rng::rng_from;
use socketvib::signal::{
    Dataset, DatasetManifest, Finger, ImpactSample, ReducedTrace, ReductionMethod, SampleMeta, SplitRole, WINDOW_LEN,
};
use socketvib::sim::HandArchetype;
use socketvib::Error;

/// Noisy sequences whose mean level depends on the class. A nearest-centroid
/// rule on the per-sample mean separates them perfectly.
fn offset_set(per_class: usize, seed: u64, first_id: u32, role: SplitRole) -> Dataset {
    let mut r = rng_from(seed, &[42]);
    let mut samples = Vec::new();
    for f in Finger::ALL {
        for i in 0..per_class {
            let level = f.index() as f64 - 2.0;
            let traces = (0..5)
                .map(|_| {
                    let v = (0..WINDOW_LEN).map(|_| level + r.random_range(-0.3..0.3)).collect();
                    ReducedTrace::new(v, ReductionMethod::Dft321).unwrap()
                })
                .collect();
            samples.push(ImpactSample {
                label: f,
                traces,
                hand: HandArchetype::Ch,
                meta: SampleMeta { id: first_id + (f.index() * per_class + i) as u32, amplitude: 0.5, seed: 0 },
            });
        }
    }
    let mut m = DatasetManifest::new(HandArchetype::Ch, seed);
    m.role = role;
    Dataset::new(m, samples)
}

fn small_spec() -> NetworkSpec {
    NetworkSpec::new(8, 8)
}

fn cfg(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig { learning_rate: 0.01, epochs, batch_size: 16, seed }
}

fn centroid_accuracy(train_set: &Dataset, test: &Dataset) -> f64 {
    let mean = |s: &ImpactSample| s.traces.iter().flat_map(|t| &t.samples).sum::<f64>() / (5 * WINDOW_LEN) as f64;
    let mut c = [0.0; 5];
    for s in &train_set.samples {
        c[s.label.index()] += mean(s) / (train_set.len() / 5) as f64;
    }
    let hits = test
        .samples
        .iter()
        .filter(|s| {
            let m = mean(s);
            let best = (0..5).min_by(|&a, &b| (c[a] - m).abs().total_cmp(&(c[b] - m).abs())).unwrap();
            best == s.label.index()
        })
        .count();
    hits as f64 / test.len() as f64
}

#[test]
fn separable_offsets_are_learned() {
    let tr = offset_set(20, 1, 0, SplitRole::Train);
    let va = offset_set(10, 2, 1000, SplitRole::Validation);
    assert_eq!(centroid_accuracy(&tr, &va), 1.0);
    let (params, hist) = train(&small_spec(), &cfg(30, 3), &tr, &va).unwrap();
    assert!(hist.best_val_accuracy >= 0.95, "best val accuracy {}", hist.best_val_accuracy);
    assert_eq!(hist.epochs.len(), 30);
    assert_eq!(params.provenance.best_epoch, Some(hist.best_epoch));
    assert_eq!(params.provenance.val_accuracy, Some(hist.best_val_accuracy));
    let first = hist.epochs.iter().position(|e| e.val_accuracy == hist.best_val_accuracy).unwrap();
    assert_eq!(hist.best_epoch, first + 1);
}

#[test]
fn training_is_deterministic() {
    let tr = offset_set(6, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    let a = train(&small_spec(), &cfg(4, 9), &tr, &va).unwrap();
    let b = train(&small_spec(), &cfg(4, 9), &tr, &va).unwrap();
    assert_eq!(a, b);
    let c = train(&small_spec(), &cfg(4, 10), &tr, &va).unwrap();
    assert_ne!(a.0.theta, c.0.theta);
}

#[test]
fn contract_violations_are_rejected() {
    let tr = offset_set(4, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    assert!(matches!(train(&small_spec(), &cfg(0, 1), &tr, &va), Err(Error::InvalidArgument(_))));
    let mut lopsided = tr.clone();
    lopsided.samples.pop();
    assert!(train(&small_spec(), &cfg(2, 1), &lopsided, &va).is_err());
    let wrong = NetworkSpec { input_features: 4, ..small_spec() };
    assert!(matches!(train(&wrong, &cfg(2, 1), &tr, &va), Err(Error::Shape(_))));
}

#[test]
fn diverging_run_reports_its_epoch() {
    let tr = offset_set(4, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    let reckless = TrainConfig { learning_rate: 1e300, ..cfg(3, 1) };
    match train(&small_spec(), &reckless, &tr, &va) {
        Err(Error::Diverged { epoch, .. }) => assert_eq!(epoch, 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn evaluation_on_training_data_warns() {
    let tr = offset_set(4, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    let (params, _) = train(&small_spec(), &cfg(2, 1), &tr, &va).unwrap();
    let report = evaluate(&params, &tr).unwrap();
    assert!(report.warnings.iter().any(|w| w.contains("training split")));
    assert!(report.warnings.iter().any(|w| w.contains("used for training")));
    assert!(report.to_text().contains("warning:"));

    let clean = offset_set(2, 7, 5000, SplitRole::Test);
    assert!(evaluate(&params, &clean).unwrap().warnings.is_empty());
}

#[test]
fn random_model_is_near_chance() {
    let set = offset_set(100, 11, 0, SplitRole::Test);
    let mut accs = Vec::new();
    for seed in 0..3 {
        let params = ModelParams::init(&small_spec(), seed).unwrap();
        let report = evaluate(&params, &set).unwrap();
        assert!((report.accuracy - report.macro_recall.value).abs() < 1e-15);
        accs.push(report.accuracy);
    }
    // Five classes, 500 samples: chance 0.2 with a binomial sd of about 0.018.
    // An untrained net may still lean on the offset, so only the mean is bounded.
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((0.1..=0.3).contains(&mean), "{accs:?}");
}

#[test]
fn trained_model_generalizes_with_consistent_metrics() {
    let tr = offset_set(20, 1, 0, SplitRole::Train);
    let va = offset_set(10, 2, 1000, SplitRole::Validation);
    let (params, _) = train(&small_spec(), &cfg(30, 3), &tr, &va).unwrap();
    let test = offset_set(10, 5, 9000, SplitRole::Test);
    let r = evaluate(&params, &test).unwrap();
    assert!(r.accuracy >= 0.95, "{}", r.accuracy);
    assert!((r.accuracy - r.macro_recall.value).abs() < 1e-15);
    let refs: Vec<&ImpactSample> = test.samples.iter().collect();
    let hits = predict(&params, &refs).unwrap().iter().zip(&refs).filter(|(p, s)| **p == s.label.index()).count();
    assert_eq!(hits as f64 / test.len() as f64, r.accuracy);
}

fn tiny_space() -> SearchSpace {
    SearchSpace {
        learning_rate: (0.003, 0.02),
        epochs: (2, 4),
        dense_units: (4, 8),
        lstm_hidden: (4, 8),
        batch_sizes: vec![16, 32],
        template: small_spec(),
    }
}

#[test]
fn search_with_budget_one_returns_its_trial() {
    let tr = offset_set(6, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    let out = hyper_search(&tiny_space(), 1, 5, &tr, &va, false).unwrap();
    assert_eq!(out.trials.len(), 1);
    assert_eq!(out.best, out.trials[0]);
    let (spec, config) = tiny_space().sample(5, 0);
    assert_eq!((out.best.spec, out.best.config), (spec, config));
    assert!(matches!(hyper_search(&tiny_space(), 0, 5, &tr, &va, false), Err(Error::InvalidArgument(_))));
}

#[test]
fn degenerate_space_returns_the_only_config() {
    let tr = offset_set(6, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    let space = SearchSpace {
        learning_rate: (0.01, 0.01),
        epochs: (3, 3),
        dense_units: (6, 6),
        lstm_hidden: (5, 5),
        batch_sizes: vec![16],
        template: small_spec(),
    };
    let out = hyper_search(&space, 3, 2, &tr, &va, true).unwrap();
    for t in &out.trials {
        assert_eq!(t.spec, out.best.spec);
        assert_eq!(t.config.learning_rate, 0.01);
    }
    let (_, h) = train(&out.best.spec, &out.best.config, &tr, &va).unwrap();
    match out.best.status {
        TrialStatus::Completed { val_accuracy, best_epoch } => {
            assert_eq!(val_accuracy, h.best_val_accuracy);
            assert_eq!(best_epoch, h.best_epoch);
        }
        s => panic!("unexpected status {s:?}"),
    }
}

#[test]
fn larger_budget_never_does_worse_than_its_prefix() {
    let tr = offset_set(6, 1, 0, SplitRole::Train);
    let va = offset_set(2, 2, 1000, SplitRole::Validation);
    let full = hyper_search(&tiny_space(), 5, 8, &tr, &va, true).unwrap();
    let serial = hyper_search(&tiny_space(), 5, 8, &tr, &va, false).unwrap();
    assert_eq!(full, serial);
    for k in 1..5 {
        let prefix = hyper_search(&tiny_space(), k, 8, &tr, &va, false).unwrap();
        assert_eq!(prefix.trials[..], full.trials[..k]);
        assert!(full.best.val_accuracy() >= prefix.best.val_accuracy());
    }
    assert!(full.to_csv().lines().count() == 6);
}
