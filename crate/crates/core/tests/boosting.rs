use std::sync::OnceLock;

use proptest::prelude::*;

use localboost::boost::{
    run_ablation, run_localboost, Batch, BoostConfig, Ensemble, RunOutput, Variant,
};
use localboost::condfn::Gate;
use localboost::harness::{self, DataSource, Prepared, RunConfig};
use localboost::weaksource::GeneratorConfig;
use localboost::weighting::WeightVector;

fn config(num_lfs: usize, rounds: usize, seed: u64) -> RunConfig {
    let mut g = GeneratorConfig::benchmark();
    g.n_weak = 800;
    g.n_clean = 120;
    g.n_test = 200;
    g.dim = 6;
    g.lfs = GeneratorConfig::uniform_lfs(4, 2, num_lfs, 0.25, 0.25);
    let mut cfg = RunConfig {
        seed,
        data: DataSource::Synthetic { generator: g },
        clean_size: 100,
        rounds,
        ..RunConfig::default()
    };
    cfg.cond_fn.hidden = [8, 8];
    cfg.cond_fn.train.epochs = 5;
    cfg.learner.train.epochs = 8;
    cfg.resolve().unwrap()
}

fn setup(cfg: &RunConfig) -> (Prepared, BoostConfig) {
    (
        harness::prepare_data(cfg).unwrap(),
        cfg.boost_config().unwrap(),
    )
}

fn run(cfg: &RunConfig, variant: Variant) -> RunOutput {
    let (d, b) = setup(cfg);
    let gate = harness::train_gate(cfg, &d.weak).unwrap();
    run_ablation(variant, &d.weak, &d.clean, &gate, &b, cfg.seed).unwrap()
}

#[test]
fn one_round_one_source_is_the_init_learner_alone() {
    let out = run(&config(1, 1, 2), Variant::Full);
    assert_eq!(out.ensemble.members.len(), 1);
    assert_eq!(out.ensemble.weights.0, vec![1.0]);
    assert!(out.rounds.is_empty());
    assert_eq!(
        (out.ensemble.members[0].t, out.ensemble.members[0].l),
        (1, 1)
    );
}

#[test]
fn member_count_is_rounds_times_sources() {
    let out = run(&config(4, 2, 3), Variant::Full);
    assert_eq!(out.ensemble.members.len(), 8);
    assert_eq!(out.rounds.len(), 7);
    let slots: Vec<(usize, usize)> = out.rounds.iter().map(|r| (r.t, r.l)).collect();
    assert_eq!(slots[0], (1, 2));
    assert_eq!(slots[6], (2, 4));
}

#[test]
fn single_source_gate_is_irrelevant() {
    // with one source every gate is the constant [1]
    let cfg = config(1, 3, 5);
    let full = run(&cfg, Variant::Full);
    let flat = run(&cfg, Variant::NoCondFn);
    let hard = run(&cfg, Variant::HardMatching);
    assert_eq!(full.ensemble.weights, flat.ensemble.weights);
    assert_eq!(full.ensemble.weights, hard.ensemble.weights);
    assert_eq!(full.rounds.len(), flat.rounds.len());
}

#[test]
fn clean_error_never_exceeds_init() {
    for seed in 0..3 {
        let out = run(&config(4, 2, seed), Variant::Full);
        for r in &out.rounds {
            assert!(r.candidate_errors[r.selected] <= r.candidate_errors[0]);
        }
        let last = out.rounds.last().unwrap().clean_error;
        assert!(
            last <= out.init.clean_error,
            "seed {seed}: {last} > {}",
            out.init.clean_error
        );
    }
}

#[test]
fn selected_weights_lie_on_the_simplex() {
    let out = run(&config(4, 2, 7), Variant::Full);
    for r in &out.rounds {
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(r.weights.iter().all(|&w| w >= 0.0));
    }
}

#[test]
fn run_localboost_matches_full_ablation() {
    let cfg = config(4, 1, 9);
    let (d, b) = setup(&cfg);
    let cond_fn = harness::train_gate(&cfg, &d.weak).unwrap();
    let a = run_ablation(Variant::Full, &d.weak, &d.clean, &cond_fn, &b, cfg.seed).unwrap();
    let g = Gate::Learned { cond_fn };
    let b2 = run_localboost(&d.weak, &d.clean, g, &b, cfg.seed).unwrap();
    assert_eq!(
        a.ensemble.to_json().unwrap(),
        b2.ensemble.to_json().unwrap()
    );
}

#[test]
fn saved_ensemble_round_trips() {
    let out = run(&config(4, 1, 11), Variant::HardMatching);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.json");
    out.ensemble.save(&path).unwrap();
    let back = Ensemble::load(&path).unwrap();
    assert_eq!(back.to_json().unwrap(), out.ensemble.to_json().unwrap());
}

fn trained_ensemble() -> &'static (Ensemble, Prepared) {
    static CELL: OnceLock<(Ensemble, Prepared)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = config(4, 1, 13);
        let out = run(&cfg, Variant::Full);
        (out.ensemble, harness::prepare_data(&cfg).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn positive_weight_scaling_keeps_predictions(scale in 1e-3f64..1e3) {
        let (e, d) = trained_ensemble();
        let batch = Batch::from_clean(&d.test);
        let before = e.predict_batch(&batch).unwrap();
        let mut scaled = e.clone();
        scaled.weights = WeightVector(e.weights.0.iter().map(|w| w * scale).collect());
        prop_assert_eq!(scaled.predict_batch(&batch).unwrap(), before);
    }
}
