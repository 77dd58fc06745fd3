use std::sync::OnceLock;

use proptest::prelude::*;

use rdfrl_core::domains::{Domain, DomainConfig, ToyDomain};
use rdfrl_core::eval::{
    eval_points, evaluate_theta, gridsize_sensitivity, nonidentifiability_sweep, oracle_run, percentile_histogram,
    test_region_sweep, train_optimal_level_set, EvalReport, MethodReturns, SeedRun, SweepRecord,
};
use rdfrl_core::objectives::PreferenceDist;
use rdfrl_core::training::{ObjectiveKind, TrainConfig};

fn toy() -> &'static Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN.get_or_init(|| {
        let cfg = DomainConfig::Toy(ToyDomain::default());
        Domain::build(&cfg, cfg.default_planner()).unwrap()
    })
}

fn lattice(method: &str, rets: &[f64]) -> MethodReturns {
    MethodReturns {
        method: method.into(),
        returns: rets.iter().enumerate().map(|(i, &r)| (0.5, i as u64, r)).collect(),
    }
}

#[test]
fn percentile_example() {
    let methods = [lattice("a", &[10.0]), lattice("b", &[20.0]), lattice("c", &[30.0])];
    let h = percentile_histogram(&methods).unwrap();
    assert_eq!(h.iter().map(|x| x.scores[0]).collect::<Vec<_>>(), vec![0.0, 50.0, 100.0]);
    assert_eq!(h[0].bins[0], 1);
    assert_eq!(h[1].bins[5], 1);
    assert_eq!(h[2].bins[9], 1);
}

#[test]
fn equal_returns_all_score_100() {
    let methods = [lattice("a", &[7.0, 1.0]), lattice("b", &[7.0, 1.0])];
    for h in percentile_histogram(&methods).unwrap() {
        assert_eq!(h.scores, vec![100.0, 100.0]);
        assert_eq!(h.bins[9], 2);
    }
}

#[test]
fn lattice_mismatch_is_rejected() {
    let mut b = lattice("b", &[1.0, 2.0]);
    b.returns[1].1 = 99;
    assert!(percentile_histogram(&[lattice("a", &[1.0, 2.0]), b]).is_err());
    assert!(percentile_histogram(&[lattice("a", &[1.0]), lattice("b", &[1.0, 2.0])]).is_err());
    assert!(percentile_histogram(&[]).is_err());
}

proptest! {
    #[test]
    fn histogram_counts_cover_the_lattice(rets in prop::collection::vec(prop::collection::vec(-100.0..100.0f64, 6), 1..5)) {
        let methods: Vec<MethodReturns> = rets.iter().enumerate().map(|(i, r)| lattice(&i.to_string(), r)).collect();
        let hs = percentile_histogram(&methods).unwrap();
        for h in &hs {
            prop_assert_eq!(h.bins.iter().sum::<usize>(), 6);
            prop_assert!(h.scores.iter().all(|&s| (0.0..=100.0).contains(&s)));
        }
        for i in 0..6 {
            prop_assert!(hs.iter().any(|h| h.scores[i] == 100.0));
        }
    }
}

#[test]
fn eval_points_examples() {
    assert_eq!(eval_points(0.5, 1.0, 3).unwrap(), vec![0.5, 0.75, 1.0]);
    assert_eq!(eval_points(0.2, 0.2, 1).unwrap(), vec![0.2]);
    assert!(eval_points(0.0, 1.0, 0).is_err());
    assert!(eval_points(1.0, 0.0, 3).is_err());
}

#[test]
fn report_statistics() {
    let runs = vec![
        SeedRun { seed: 0, per_w: vec![1.0, 3.0], train: 2.0 },
        SeedRun { seed: 1, per_w: vec![3.0, 5.0], train: 4.0 },
    ];
    let r = EvalReport::from_runs("m", 1.0, vec![0.5, 1.0], runs).unwrap();
    assert_eq!(r.per_w_mean, vec![2.0, 4.0]);
    assert_eq!(r.per_w_std, vec![1.0, 1.0]);
    assert_eq!((r.j_train_mean, r.j_train_std), (3.0, 1.0));
    assert_eq!((r.j_avg_mean, r.j_avg_std), (3.0, 1.0));
    assert!(EvalReport::from_runs("m", 1.0, vec![0.5], vec![]).is_err());
    let short = vec![SeedRun { seed: 0, per_w: vec![1.0], train: 0.0 }];
    assert!(EvalReport::from_runs("m", 1.0, vec![0.5, 1.0], short).is_err());
}

#[test]
fn single_point_region_equals_train_score() {
    let pl = &toy().pipeline;
    let run = evaluate_theta(pl, &[1.5], &[1.0], 1.0, 0).unwrap();
    assert_eq!(run.per_w, vec![run.train]);
    assert_eq!(run.train, 51.0);
    let rep = test_region_sweep(pl, "x", &[1.5], &[1.0], 1.0, &[0, 1]).unwrap();
    assert_eq!(rep.j_avg_mean, rep.j_train_mean);
    assert_eq!(rep.j_avg_std, 0.0);
}

#[test]
fn oracle_dominates_models() {
    let d = toy();
    let ws = [0.5, 0.75, 1.0];
    let oracle = oracle_run(&d.pipeline, &d.pipeline.grid, &ws, 1.0, 0).unwrap();
    assert_eq!(oracle.train, 51.0);
    for c in [1.5, 3.25, 5.0] {
        let model = evaluate_theta(&d.pipeline, &[c], &ws, 1.0, 0).unwrap();
        assert!(oracle.per_w.iter().zip(&model.per_w).all(|(o, m)| o >= m), "c={c}");
    }
}

#[test]
fn level_set_and_spread() {
    let rec = |j_train, j_test| SweepRecord { theta: vec![], j_train, j_test };
    let records = [rec(51.0, 10.0), rec(51.0, -5.0), rec(44.0, 400.0)];
    let (set, spread) = train_optimal_level_set(&records, 1e-9);
    assert_eq!(set.len(), 2);
    assert_eq!(spread, 15.0);
    let (empty, spread) = train_optimal_level_set(&[], 1e-9);
    assert!(empty.is_empty() && spread == 0.0);
}

#[test]
fn sweep_input_validation() {
    let pl = &toy().pipeline;
    assert!(nonidentifiability_sweep(pl, &[], 1.0, &[0.5]).is_err());
    assert!(nonidentifiability_sweep(pl, &[vec![1.5]], 1.0, &[]).is_err());
    let cfg = TrainConfig {
        kind: ObjectiveKind::Rdf,
        dist: Some(PreferenceDist::uniform(0.5, 1.0).unwrap()),
        max_iters: 1,
        ..TrainConfig::default()
    };
    assert!(gridsize_sensitivity(pl, &cfg, &[1], &[0.5]).is_err());
    assert!(gridsize_sensitivity(pl, &cfg, &[3, 0], &[0.5]).is_err());
}
