use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rdfrl_core::envs::{Action, Environment, ToyEnv, UniformPolicy};
use rdfrl_core::models::{
    collect_balanced, collect_transitions, mle_linear, mle_shared_scalar, mle_tabular, model_predict,
    smoothed_frequencies, LinearModel, Prediction, SharedScalarModel, StartMode, TabularModel, Transition,
    TransitionDataset, TransitionModel,
};
use rdfrl_core::objectives::mle_objective_and_gradient;
use rdfrl_core::GridSpec;

fn toy_vectors() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.0, 1.0]]
}

fn toy_only(action: usize, n: usize) -> TransitionDataset {
    let env = ToyEnv::default();
    let mut rng = ChaCha8Rng::seed_from_u64(action as u64);
    let records = (0..n)
        .map(|_| {
            let s = vec![rng.random_range(0.0..20.0), rng.random_range(0.0..20.0)];
            let next = env.step(&s, Action(action)).unwrap();
            Transition { s, a: Action(action), next }
        })
        .collect();
    TransitionDataset { records, seed: 0, policy: "fixed".into() }
}

#[test]
fn collect_rejects_empty_request() {
    let env = ToyEnv::default();
    let policy = UniformPolicy { n_actions: 2 };
    assert!(collect_transitions(&env, &policy, 0, 0, StartMode::Episodic).is_err());
    assert!(collect_balanced(&env, 0, 0, StartMode::Episodic).is_err());
}

#[test]
fn collection_is_reproducible() {
    let env = ToyEnv::default();
    let policy = UniformPolicy { n_actions: 2 };
    let a = collect_transitions(&env, &policy, 500, 9, StartMode::Episodic).unwrap();
    let b = collect_transitions(&env, &policy, 500, 9, StartMode::Episodic).unwrap();
    assert_eq!(a, b);
    let c = collect_transitions(&env, &policy, 500, 10, StartMode::Episodic).unwrap();
    assert_ne!(a, c);
}

#[test]
fn uniform_policy_action_counts_within_three_sigma() {
    let env = ToyEnv::default();
    let policy = UniformPolicy { n_actions: 2 };
    let n = 10_000;
    let data = collect_transitions(&env, &policy, n, 0, StartMode::Episodic).unwrap();
    let sigma = (n as f64 * 0.25).sqrt();
    for c in data.action_counts(2) {
        assert!((c as f64 - n as f64 / 2.0).abs() <= 3.0 * sigma, "count {c}");
    }
}

#[test]
fn uniform_starts_stay_in_the_box_and_avoid_terminal_states() {
    let env = ToyEnv::default();
    let policy = UniformPolicy { n_actions: 2 };
    let data = collect_transitions(&env, &policy, 1000, 4, StartMode::Uniform).unwrap();
    for t in &data.records {
        assert!(!env.is_terminal(&t.s));
        assert!(t.s.iter().all(|&x| (0.0..=26.0).contains(&x)));
    }
}

#[test]
fn balanced_dataset_gives_c_3_25() {
    let env = ToyEnv::default();
    let data = collect_balanced(&env, 10_000, 0, StartMode::Episodic).unwrap();
    assert_eq!(data.action_counts(2), vec![5000, 5000]);
    let m = mle_shared_scalar(&data, &toy_vectors()).unwrap();
    assert!((m.c - 3.25).abs() < 1e-6, "c = {}", m.c);
}

#[test]
fn single_action_datasets_recover_that_step() {
    let m = mle_shared_scalar(&toy_only(0, 50), &toy_vectors()).unwrap();
    assert!((m.c - 1.5).abs() < 1e-12);
    let m = mle_shared_scalar(&toy_only(1, 50), &toy_vectors()).unwrap();
    assert!((m.c - 5.0).abs() < 1e-12);
}

#[test]
fn empty_dataset_is_an_error() {
    let empty = TransitionDataset { records: vec![], seed: 0, policy: "none".into() };
    assert!(mle_shared_scalar(&empty, &toy_vectors()).is_err());
    assert!(mle_linear(&empty, 2, 0.0).is_err());
}

#[test]
fn shared_scalar_mle_matches_gradient_descent() {
    let env = ToyEnv::default();
    let data = collect_transitions(&env, &UniformPolicy { n_actions: 2 }, 2000, 5, StartMode::Episodic).unwrap();
    let closed = mle_shared_scalar(&data, &toy_vectors()).unwrap().c;
    let mut model = TransitionModel::SharedScalar(SharedScalarModel::axis_aligned(1.0, 2));
    for _ in 0..200 {
        let (_, g) = mle_objective_and_gradient(&model, &data).unwrap();
        let c = model.params()[0] + 0.5 * g[0];
        model.set_params(&[c]).unwrap();
    }
    assert!((model.params()[0] - closed).abs() < 1e-8);
}

#[test]
fn mle_gradient_vanishes_at_the_fit_and_points_up_below_it() {
    let env = ToyEnv::default();
    let data = collect_balanced(&env, 10_000, 0, StartMode::Episodic).unwrap();
    let at = |c: f64| {
        let m = TransitionModel::SharedScalar(SharedScalarModel::axis_aligned(c, 2));
        mle_objective_and_gradient(&m, &data).unwrap()
    };
    assert!(at(3.25).1[0].abs() < 1e-8);
    assert!(at(1.0).1[0] > 0.0);
    let exact = toy_only(0, 20);
    let m = TransitionModel::SharedScalar(SharedScalarModel::axis_aligned(1.5, 2));
    assert_eq!(mle_objective_and_gradient(&m, &exact).unwrap().0, 0.0);
}

fn linear_data(model: &LinearModel, n: usize, seed: u64) -> TransitionDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|_| {
            let s: Vec<f64> = (0..model.state_dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let a = Action(rng.random_range(0..model.n_actions()));
            let next = model.predict(&s, a);
            Transition { s, a, next }
        })
        .collect();
    TransitionDataset { records, seed, policy: "random".into() }
}

#[test]
fn linear_fit_recovers_noise_free_model() {
    let truth = LinearModel::new(
        3,
        2,
        vec![0.9, 0.1, 0.0, -0.2, 1.1, 0.3, 0.05, 0.0, 0.7],
        vec![1.0, -1.0, 0.5, 0.25, 0.0, 2.0],
        vec![0.0; 3],
    )
    .unwrap();
    let fit = mle_linear(&linear_data(&truth, 200, 1), 2, 0.0).unwrap();
    assert!(!fit.rank_deficient);
    for (a, b) in fit.model.params().iter().zip(truth.params()) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
}

#[test]
fn linear_fit_folds_bias_into_action_columns() {
    let truth = LinearModel::new(2, 2, vec![1.0, 0.2, 0.0, 0.8], vec![0.5, -0.5, 1.0, 0.0], vec![0.3, -0.1]).unwrap();
    let data = linear_data(&truth, 100, 2);
    let fit = mle_linear(&data, 2, 0.0).unwrap();
    for t in &data.records {
        let p = fit.model.predict(&t.s, t.a);
        assert!(p.iter().zip(&t.next).all(|(x, y)| (x - y).abs() < 1e-8));
    }
}

#[test]
fn toy_data_in_the_linear_class() {
    let env = ToyEnv::default();
    let data = collect_transitions(&env, &UniformPolicy { n_actions: 2 }, 2000, 3, StartMode::Uniform).unwrap();
    let fit = mle_linear(&data, 2, 0.0).unwrap();
    let p = fit.model.params();
    // A row-major, then B with one column per action.
    for (got, want) in p[..4].iter().zip([1.0, 0.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 1e-6);
    }
    for (got, want) in p[4..8].iter().zip([1.5, 0.0, 0.0, 5.0]) {
        assert!((got - want).abs() < 1e-6);
    }
}

#[test]
fn rank_deficient_design_is_flagged() {
    let env = ToyEnv::default();
    // Every record starts at the origin: the state columns are all zero.
    let records = (0..10)
        .map(|i| {
            let a = Action(i % 2);
            Transition { s: vec![0.0, 0.0], a, next: env.step(&[0.0, 0.0], a).unwrap() }
        })
        .collect();
    let data = TransitionDataset { records, seed: 0, policy: "fixed".into() };
    let fit = mle_linear(&data, 2, 0.0).unwrap();
    assert!(fit.rank_deficient);
    assert!(fit.model.params().iter().all(|x| x.is_finite()));
    assert!(fit.model.params()[..4].iter().all(|x| x.abs() < 1e-12));
}

#[test]
fn single_transition_with_ridge_is_finite() {
    let records = vec![Transition { s: vec![1.0, 2.0], a: Action(0), next: vec![3.0, 4.0] }];
    let data = TransitionDataset { records, seed: 0, policy: "one".into() };
    let fit = mle_linear(&data, 2, 1e-3).unwrap();
    assert!(fit.model.params().iter().all(|x| x.is_finite()));
}

#[test]
fn smoothing_examples() {
    assert_eq!(smoothed_frequencies(&[3.0, 1.0], 0.0), vec![0.75, 0.25]);
    let p = smoothed_frequencies(&[3.0, 1.0], 1.0);
    assert!((p[0] - 4.0 / 6.0).abs() < 1e-15 && (p[1] - 2.0 / 6.0).abs() < 1e-15);
    assert_eq!(smoothed_frequencies(&[0.0; 9], 0.0), vec![1.0 / 9.0; 9]);
}

fn line_grid() -> GridSpec {
    GridSpec::new(vec![0.0], vec![4.0], vec![5]).unwrap()
}

fn tabular_data(records: &[(f64, usize, f64)]) -> TransitionDataset {
    TransitionDataset {
        records: records
            .iter()
            .map(|&(s, a, n)| Transition { s: vec![s], a: Action(a), next: vec![n] })
            .collect(),
        seed: 0,
        policy: "fixed".into(),
    }
}

#[test]
fn tabular_fit_uses_empirical_frequencies() {
    let data = tabular_data(&[(2.0, 0, 3.0), (2.0, 0, 3.0), (2.0, 0, 3.0), (2.0, 0, 2.0)]);
    let m = mle_tabular(&data, line_grid(), 1, vec![1], 0.0).unwrap();
    let dist = m.distribution(2, Action(0));
    let p = |cell: usize| dist.iter().find(|e| e.0 == cell).map_or(0.0, |e| e.1);
    assert!((p(3) - 0.75).abs() < 1e-9 && (p(2) - 0.25).abs() < 1e-9 && p(1) < 1e-9);
}

#[test]
fn unvisited_cells_are_uniform_over_the_window() {
    let grid = GridSpec::new(vec![0.0, 0.0], vec![4.0, 4.0], vec![5, 5]).unwrap();
    let m = mle_tabular(&tabular_data(&[]), grid.clone(), 1, vec![1, 1], 0.0).unwrap();
    let center = grid.flat_index(&[2, 2]);
    let dist = m.distribution(center, Action(0));
    assert_eq!(dist.len(), 9);
    assert!(dist.iter().all(|e| (e.1 - 1.0 / 9.0).abs() < 1e-12));
}

#[test]
fn far_successors_clamp_to_the_window_edge() {
    let data = tabular_data(&[(0.0, 0, 4.0)]);
    let m = mle_tabular(&data, line_grid(), 1, vec![1], 0.0).unwrap();
    let dist = m.distribution(0, Action(0));
    assert!(dist.iter().any(|&(c, p)| c == 1 && (p - 1.0).abs() < 1e-9));
}

#[test]
fn predictions() {
    let m = TransitionModel::SharedScalar(SharedScalarModel::axis_aligned(1.0, 2));
    assert_eq!(model_predict(&m, &[0.0, 0.0], Action(0)).unwrap(), (Prediction::Point(vec![1.0, 0.0]), false));
    let id = TransitionModel::Linear(LinearModel::identity(3, 2));
    assert_eq!(model_predict(&id, &[1.0, -2.0, 3.0], Action(1)).unwrap().0, Prediction::Point(vec![1.0, -2.0, 3.0]));
    assert!(model_predict(&m, &[0.0], Action(0)).is_err());

    let tab = TransitionModel::Tabular(TabularModel::uniform(line_grid(), 2, vec![1]).unwrap());
    let (pred, clamped) = model_predict(&tab, &[9.0], Action(0)).unwrap();
    assert!(clamped);
    let Prediction::Cells(cells) = pred else { panic!("tabular models predict cells") };
    assert!((cells.iter().map(|c| c.1).sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn checkpoint_text_round_trips() {
    let tab = TabularModel::uniform(line_grid(), 2, vec![1]).unwrap();
    for m in [
        TransitionModel::SharedScalar(SharedScalarModel::axis_aligned(3.25, 2)),
        TransitionModel::Linear(LinearModel::identity(2, 3)),
        TransitionModel::Tabular(tab),
    ] {
        assert_eq!(TransitionModel::from_kv(&m.to_kv()).unwrap(), m);
    }
    assert!(TransitionModel::from_kv("kind=cubic\n").is_err());
}

proptest! {
    #[test]
    fn tabular_rows_stay_normalized(logits in proptest::collection::vec(-30.0..30.0f64, 30)) {
        let mut m = TabularModel::uniform(line_grid(), 2, vec![1]).unwrap();
        m.set_logits(&logits);
        for cell in 0..5 {
            for a in 0..2 {
                let total: f64 = m.distribution(cell, Action(a)).iter().map(|e| e.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mle_ignores_record_order(seed in 0..1000u64) {
        let env = ToyEnv::default();
        let data = collect_transitions(&env, &UniformPolicy { n_actions: 2 }, 300, seed, StartMode::Episodic).unwrap();
        let mut shuffled = data.clone();
        shuffled.records.shuffle(&mut ChaCha8Rng::seed_from_u64(seed + 1));
        let a = mle_shared_scalar(&data, &toy_vectors()).unwrap().c;
        let b = mle_shared_scalar(&shuffled, &toy_vectors()).unwrap().c;
        prop_assert!((a - b).abs() < 1e-12);
        let la = mle_linear(&data, 2, 1e-6).unwrap().model.params();
        let lb = mle_linear(&shuffled, 2, 1e-6).unwrap().model.params();
        prop_assert!(la.iter().zip(&lb).all(|(x, y)| (x - y).abs() < 1e-8));
    }
}
