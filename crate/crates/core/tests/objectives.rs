use std::sync::OnceLock;

use proptest::prelude::*;
use rand_chacha::ChaCha8Rng;

use rdfrl_core::domains::{Domain, DomainConfig, ToyDomain};
use rdfrl_core::envs::{Policy, ToyEnv, UniformPolicy};
use rdfrl_core::objectives::{
    df_objective, directional_derivative, policy_return, preference_grid, rdf_gradient, rdf_objective, EvalMode,
    GradientBackend, GridWeighting, LagrangianConfig, PreferenceDist, PreferenceGrid,
};
use rdfrl_core::{Action, Preference};

fn toy() -> &'static Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN.get_or_init(|| {
        let cfg = DomainConfig::Toy(ToyDomain::default());
        Domain::build(&cfg, cfg.default_planner()).unwrap()
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn uniform_grid_example() {
    let dist = PreferenceDist::uniform(0.5, 1.0).unwrap();
    let g = preference_grid(&dist, 5, GridWeighting::Uniform).unwrap();
    assert_eq!(g.points, vec![0.5, 0.625, 0.75, 0.875, 1.0]);
    assert!(g.weights.iter().all(|&w| w == 0.2));
}

#[test]
fn trapezoid_grid_example() {
    let dist = PreferenceDist::uniform(0.5, 1.0).unwrap();
    let g = preference_grid(&dist, 5, GridWeighting::Trapezoid).unwrap();
    let expect = [0.125, 0.25, 0.25, 0.25, 0.125];
    assert!(g.weights.iter().zip(expect).all(|(a, b)| close(*a, b, 1e-15)));
}

#[test]
fn grid_errors() {
    let dist = PreferenceDist::uniform(0.0, 1.0).unwrap();
    assert!(preference_grid(&dist, 1, GridWeighting::Uniform).is_err());
    assert!(preference_grid(&dist, 0, GridWeighting::Trapezoid).is_err());
    assert!(PreferenceDist::uniform(0.8, 0.2).is_err());
    assert!(PreferenceDist::uniform(-0.1, 0.5).is_err());
    assert!(LagrangianConfig::new(-1.0, 0.5).is_err());
    assert!(LagrangianConfig::new(f64::INFINITY, 0.5).is_err());
    assert!(LagrangianConfig::new(1.0, 1.5).is_err());
}

#[test]
fn split_support_covers_both_intervals() {
    let dist = PreferenceDist { support: vec![(0.8, 1.0), (0.0, 0.2)], density: Default::default() };
    let g = preference_grid(&dist, 6, GridWeighting::Uniform).unwrap();
    assert_eq!(g.len(), 6);
    assert!(g.points.iter().all(|&p| p <= 0.2 || p >= 0.8));
    assert!(g.points.contains(&0.0) && g.points.contains(&1.0));
    assert!(close(g.weights.iter().sum::<f64>(), 1.0, 1e-12));
}

proptest! {
    #[test]
    fn trapezoid_integrates_linear_functions(lo in 0.0..0.5f64, width in 0.01..0.5f64, n in 2..40usize, a in -5.0..5.0f64, b in -5.0..5.0f64) {
        let hi = lo + width;
        let g = preference_grid(&PreferenceDist::uniform(lo, hi).unwrap(), n, GridWeighting::Trapezoid).unwrap();
        let values: Vec<f64> = g.points.iter().map(|w| a + b * w).collect();
        prop_assert!(close(g.average(&values), a + b * (lo + hi) / 2.0, 1e-9));
    }

    #[test]
    fn grid_weights_are_a_distribution(n in 2..50usize, uniform in any::<bool>()) {
        let weighting = if uniform { GridWeighting::Uniform } else { GridWeighting::Trapezoid };
        let g = preference_grid(&PreferenceDist::uniform(0.5, 1.0).unwrap(), n, weighting).unwrap();
        prop_assert!(close(g.weights.iter().sum::<f64>(), 1.0, 1e-12));
        prop_assert!(g.weights.iter().all(|&w| w > 0.0));
        prop_assert!(g.points.windows(2).all(|p| p[0] < p[1]));
    }
}

#[test]
fn rdf_decomposes_into_average_and_train_term() {
    let pl = &toy().pipeline;
    let theta = [2.5];
    let grid = preference_grid(&PreferenceDist::uniform(0.5, 1.0).unwrap(), 3, GridWeighting::Uniform).unwrap();
    let mode = EvalMode::Soft(0.5);
    let base = rdf_objective(pl, &theta, &grid, &LagrangianConfig::new(0.0, 0.3).unwrap(), mode).unwrap();
    let per: Vec<f64> = grid.points.iter().map(|&w| pl.evaluate(&theta, w, mode).unwrap()).collect();
    assert!(close(base.value, grid.average(&per), 1e-12));
    let train = pl.evaluate(&theta, 0.3, mode).unwrap();
    for lambda in [1.0, 10.0, 100.0] {
        let v = rdf_objective(pl, &theta, &grid, &LagrangianConfig::new(lambda, 0.3).unwrap(), mode).unwrap();
        assert!(close(v.value, base.value + lambda * train, 1e-12 * v.value.abs().max(1.0)));
        assert!(close(v.train, train, 1e-12));
    }
}

#[test]
fn singleton_grid_reduces_to_df() {
    let pl = &toy().pipeline;
    let mode = EvalMode::Soft(0.5);
    let v = rdf_objective(pl, &[2.0], &PreferenceGrid::singleton(0.7), &LagrangianConfig::new(0.0, 0.7).unwrap(), mode)
        .unwrap();
    assert!(close(v.value, df_objective(pl, &[2.0], 0.7, mode).unwrap(), 1e-12));
    assert_eq!(v.train, v.average);
}

#[test]
fn malformed_grid_is_rejected() {
    let pl = &toy().pipeline;
    let grid = PreferenceGrid { points: vec![0.5, 1.0], weights: vec![1.0] };
    let cfg = LagrangianConfig::new(0.0, 1.0).unwrap();
    assert!(rdf_objective(pl, &[2.0], &grid, &cfg, EvalMode::Greedy).is_err());
    assert!(pl.evaluate(&[1.0, 2.0], 1.0, EvalMode::Greedy).is_err());
    assert!(pl.evaluate(&[f64::NAN], 1.0, EvalMode::Greedy).is_err());
}

#[test]
fn correct_model_scores_the_true_optimum() {
    let pl = &toy().pipeline;
    assert_eq!(df_objective(pl, &[1.5], 1.0, EvalMode::Greedy).unwrap(), 51.0);
}

#[test]
fn degenerate_models_give_finite_scores() {
    let pl = &toy().pipeline;
    for c in [0.01, 25.0, 40.0] {
        let j = df_objective(pl, &[c], 1.0, EvalMode::Greedy).unwrap();
        assert!(j.is_finite(), "c={c}");
    }
}

#[test]
fn backends_agree_on_the_toy() {
    // Away from values of c where s + c lands on a node or the boundary.
    let pl = &toy().pipeline;
    let grid = preference_grid(&PreferenceDist::uniform(0.5, 1.0).unwrap(), 3, GridWeighting::Uniform).unwrap();
    let cfg = LagrangianConfig::new(1.0, 1.0).unwrap();
    let implicit = rdf_gradient(pl, &[3.13], &grid, &cfg, GradientBackend::Implicit, 0.5).unwrap();
    let fd = rdf_gradient(pl, &[3.13], &grid, &cfg, GradientBackend::finite_difference(), 0.5).unwrap();
    let dd = directional_derivative(pl, &[3.13], &[1.0], &grid, &cfg, 0.5, 1e-4).unwrap();
    assert!(close(implicit.value.value, fd.value.value, 1e-12));
    let (a, b) = (implicit.grad[0], fd.grad[0]);
    assert!((a - b).abs() <= 1e-2 * a.abs().max(b.abs()), "{a} vs {b}");
    assert!((a - dd).abs() <= 1e-2 * a.abs().max(dd.abs()), "{a} vs {dd}");
}

#[test]
fn bad_fd_steps_are_rejected() {
    let pl = &toy().pipeline;
    let backend = GradientBackend::FiniteDifference { rel_step: 0.0, min_step: 1e-4 };
    let cfg = LagrangianConfig::new(0.0, 1.0).unwrap();
    assert!(rdf_gradient(pl, &[3.0], &PreferenceGrid::singleton(1.0), &cfg, backend, 0.5).is_err());
}

struct AlwaysUp;

impl Policy for AlwaysUp {
    fn action_probs(&self, _s: &[f64]) -> Vec<f64> {
        vec![0.0, 1.0]
    }

    fn is_deterministic(&self) -> bool {
        true
    }

    fn act(&self, _s: &[f64], _rng: &mut ChaCha8Rng) -> Action {
        Action(1)
    }
}

#[test]
fn deterministic_policies_have_zero_spread() {
    let env = ToyEnv::default();
    let w = Preference::scalar(0.5).unwrap();
    let (_, std) = policy_return(&env, &AlwaysUp, &w, 10, 3).unwrap();
    assert_eq!(std, 0.0);
    assert!(policy_return(&env, &AlwaysUp, &w, 0, 3).is_err());
    let (m1, _) = policy_return(&env, &UniformPolicy { n_actions: 2 }, &w, 20, 7).unwrap();
    let (m2, s2) = policy_return(&env, &UniformPolicy { n_actions: 2 }, &w, 20, 7).unwrap();
    assert_eq!(m1, m2);
    assert!(s2 > 0.0);
}
