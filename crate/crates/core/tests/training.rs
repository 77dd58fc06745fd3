use std::sync::OnceLock;

use rdfrl_core::domains::{Domain, DomainConfig, ToyDomain};
use rdfrl_core::objectives::{GridWeighting, PreferenceDist};
use rdfrl_core::training::{lambda_sweep, select_best, train_df, train_rdf, Init, ObjectiveKind, TrainConfig};

fn toy() -> &'static Domain {
    static DOMAIN: OnceLock<Domain> = OnceLock::new();
    DOMAIN.get_or_init(|| {
        let cfg = DomainConfig::Toy(ToyDomain::default());
        Domain::build(&cfg, cfg.default_planner()).unwrap()
    })
}

fn rdf_config() -> TrainConfig {
    TrainConfig {
        kind: ObjectiveKind::Rdf,
        lambda: 1.0,
        w_train: 1.0,
        dist: Some(PreferenceDist::uniform(0.5, 1.0).unwrap()),
        grid_size: 3,
        weighting: GridWeighting::Uniform,
        step_size: 0.05,
        max_iters: 5,
        tau: 0.5,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_step_leaves_theta_unchanged() {
    let cfg = TrainConfig { step_size: 0.0, tau: 0.5, max_iters: 3, ..TrainConfig::default() };
    let r = train_df(&toy().pipeline, &cfg).unwrap();
    assert_eq!(r.theta, toy().mle_theta());
    assert!(!r.converged);
}

#[test]
fn flat_start_converges_immediately() {
    // Inside the soft plateau the gradient vanishes.
    let cfg = TrainConfig {
        init: Init::Given(vec![1.5]),
        tau: 0.05,
        grad_tol: 1e-3,
        max_iters: 10,
        ..TrainConfig::default()
    };
    let r = train_df(&toy().pipeline, &cfg).unwrap();
    assert!(r.converged);
    assert!((r.theta[0] - 1.5).abs() < 1e-6);
}

#[test]
fn objective_trace_never_decreases() {
    let r = train_rdf(&toy().pipeline, &rdf_config()).unwrap();
    assert!(!r.objective_trace.is_empty());
    assert!(r.objective_trace.windows(2).all(|p| p[1] >= p[0]));
    assert_eq!(r.lambda, 1.0);
}

#[test]
fn lambda_sweep_is_ordered_and_deterministic() {
    let cfg = TrainConfig { max_iters: 2, ..rdf_config() };
    let lambdas = [0.0, 10.0];
    let a = lambda_sweep(&toy().pipeline, &cfg, &lambdas).unwrap();
    let b = lambda_sweep(&toy().pipeline, &cfg, &lambdas).unwrap();
    assert_eq!(a.len(), 2);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.theta, y.theta);
        assert_eq!(x.objective_trace, y.objective_trace);
    }
    assert_eq!(a.iter().map(|r| r.lambda).collect::<Vec<_>>(), lambdas);
    assert!(lambda_sweep(&toy().pipeline, &cfg, &[]).is_err());
    let best = select_best(&a, |r| Ok(r.lambda)).unwrap();
    assert_eq!(best, 1);
    assert!(select_best(&[], |_| Ok(0.0)).is_err());
}

#[test]
fn config_validation() {
    let bad = [
        TrainConfig { step_size: -1.0, ..TrainConfig::default() },
        TrainConfig { max_iters: 0, ..TrainConfig::default() },
        TrainConfig { tau: 0.0, ..TrainConfig::default() },
        TrainConfig { lambda: -0.5, ..TrainConfig::default() },
        TrainConfig { w_train: 2.0, ..TrainConfig::default() },
        TrainConfig { dist: None, ..rdf_config() },
    ];
    for cfg in bad {
        assert!(cfg.validate().is_err(), "{cfg:?}");
        assert!(train_rdf(&toy().pipeline, &cfg).is_err());
    }
    let wrong_len = TrainConfig { init: Init::Given(vec![1.0, 2.0]), ..TrainConfig::default() };
    assert!(train_df(&toy().pipeline, &wrong_len).is_err());
}

#[test]
fn mle_kind_returns_the_fit() {
    let cfg = TrainConfig { kind: ObjectiveKind::Mle, ..TrainConfig::default() };
    let r = train_rdf(&toy().pipeline, &cfg).unwrap();
    assert_eq!(r.theta, toy().mle_theta());
}
