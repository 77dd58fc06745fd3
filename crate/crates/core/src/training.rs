//! Gradient-ascent training of model parameters.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{
    preference_grid, rdf_gradient_warm, GradientBackend, GridWeighting,
    LagrangianConfig, Pipeline, PreferenceDist, PreferenceGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Mle,
    Df,
    Rdf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Init {
    /// The pipeline's template parameters, normally the maximum-likelihood fit.
    Template,
    Given(Vec<f64>),
    /// Best of `restarts` runs from uniform draws in `[lo, hi]` per parameter.
    Random { restarts: usize, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ObjectiveKind,
    pub lambda: f64,
    pub w_train: f64,
    pub dist: Option<PreferenceDist>,
    pub grid_size: usize,
    pub weighting: GridWeighting,
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Halvings tried before an iteration gives up.
    pub max_halvings: usize,
    pub tau: f64,
    pub backend: GradientBackend,
    pub init: Init,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            kind: ObjectiveKind::Df,
            lambda: 0.0,
            w_train: 1.0,
            dist: None,
            grid_size: 5,
            weighting: GridWeighting::Uniform,
            step_size: 0.05,
            max_iters: 500,
            grad_tol: 1e-4,
            max_halvings: 30,
            tau: 0.05,
            backend: GradientBackend::Implicit,
            init: Init::Template,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size >= 0.0 && self.step_size.is_finite()) {
            return Err(Error::config("step size must be finite and non-negative"));
        }
        if self.max_iters == 0 {
            return Err(Error::config("iteration budget must be at least 1"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config("training temperature must be positive"));
        }
        LagrangianConfig::new(self.lambda, self.w_train)?;
        if self.kind == ObjectiveKind::Rdf && self.dist.is_none() {
            return Err(Error::config("robust training needs a preference distribution"));
        }
        Ok(())
    }

    /// The grid and Lagrangian actually optimized.
    pub fn objective(&self) -> Result<(PreferenceGrid, LagrangianConfig)> {
        match self.kind {
            ObjectiveKind::Rdf => {
                let dist = self.dist.as_ref().ok_or_else(|| Error::config("missing preference distribution"))?;
                Ok((
                    preference_grid(dist, self.grid_size, self.weighting)?,
                    LagrangianConfig::new(self.lambda, self.w_train)?,
                ))
            }
            _ => Ok((PreferenceGrid::singleton(self.w_train), LagrangianConfig::new(0.0, self.w_train)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub theta: Vec<f64>,
    /// Soft objective after each accepted iterate, starting with the initial point.
    pub objective_trace: Vec<f64>,
    pub per_w_trace: Vec<Vec<(f64, f64)>>,
    pub wall_time: Duration,
    pub converged: bool,
    pub iterations: usize,
    pub lambda: f64,
}

/// Gradient ascent with per-iteration backtracking: the step starts at
/// `step_size` and halves until the objective does not decrease.
pub fn train_rdf(pipeline: &Pipeline, cfg: &TrainConfig) -> Result<TrainResult> {
    cfg.validate()?;
    match &cfg.init {
        Init::Random { restarts, lo, hi } => {
            if *restarts == 0 || !(lo <= hi) {
                return Err(Error::config("random init needs restarts >= 1 and lo <= hi"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let dim = pipeline.family.trainable.len();
            let mut best: Option<TrainResult> = None;
            for _ in 0..*restarts {
                let start: Vec<f64> = (0..dim).map(|_| if hi > lo { rng.random_range(*lo..*hi) } else { *lo }).collect();
                let run = ascend(pipeline, cfg, start)?;
                let better = match &best {
                    None => true,
                    Some(b) => run.objective_trace.last() > b.objective_trace.last(),
                };
                if better {
                    best = Some(run);
                }
            }
            Ok(best.expect("at least one restart"))
        }
        Init::Given(theta) => ascend(pipeline, cfg, theta.clone()),
        Init::Template => ascend(pipeline, cfg, pipeline.family.initial_theta()),
    }
}

/// Decision-focused training: a single grid point at `w_train`, no Lagrangian term.
pub fn train_df(pipeline: &Pipeline, cfg: &TrainConfig) -> Result<TrainResult> {
    let mut c = cfg.clone();
    c.kind = ObjectiveKind::Df;
    c.lambda = 0.0;
    train_rdf(pipeline, &c)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn ascend(pipeline: &Pipeline, cfg: &TrainConfig, theta0: Vec<f64>) -> Result<TrainResult> {
    let start = Instant::now();
    let mut theta = pipeline.family.project(&theta0)?;
    if cfg.kind == ObjectiveKind::Mle {
        return Ok(TrainResult {
            theta,
            objective_trace: vec![],
            per_w_trace: vec![],
            wall_time: start.elapsed(),
            converged: true,
            iterations: 0,
            lambda: 0.0,
        });
    }
    let (grid, lag) = cfg.objective()?;
    // Steps act on the objective divided by its total weight, so lambda moves
    // the optimum without rescaling the step.
    let scale = grid.weights.iter().sum::<f64>() + lag.lambda;
    let mut current = rdf_gradient_warm(pipeline, &theta, &grid, &lag, cfg.backend, cfg.tau, None)?;
    let mut objective_trace = vec![current.value.value];
    let mut per_w_trace = vec![current.value.per_w.clone()];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        let gnorm = norm(&current.grad);
        if gnorm < cfg.grad_tol {
            converged = true;
            break;
        }
        if cfg.step_size == 0.0 {
            break;
        }
        iterations += 1;
        let mut step = cfg.step_size / scale;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let cand: Vec<f64> = theta.iter().zip(&current.grad).map(|(t, g)| t + step * g).collect();
            let cand = pipeline.family.project(&cand)?;
            if cand != theta {
                match rdf_gradient_warm(pipeline, &cand, &grid, &lag, cfg.backend, cfg.tau, Some(&current.tables)) {
                    Ok(next) if !next.value.value.is_finite() => {
                        return Err(Error::NonFinite { context: "training objective".into(), index: iterations });
                    }
                    Ok(next) if next.value.value >= current.value.value => {
                        accepted = Some((cand, next));
                        break;
                    }
                    Ok(_) => {}
                    Err(e) if e.is_numerical() => log::debug!("rejected step: {e}"),
                    Err(e) => return Err(e),
                }
            }
            step *= 0.5;
        }
        let Some((cand, next)) = accepted else {
            log::debug!("no ascent step found after {} halvings", cfg.max_halvings);
            break;
        };
        theta = cand;
        current = next;
        objective_trace.push(current.value.value);
        per_w_trace.push(current.value.per_w.clone());
        log::debug!(
            "iter {iterations}: objective {:.6} |grad| {:.3e} step {step:.3e}",
            current.value.value,
            norm(&current.grad)
        );
    }
    if !converged && norm(&current.grad) < cfg.grad_tol && cfg.step_size > 0.0 {
        converged = true;
    }
    Ok(TrainResult {
        theta,
        objective_trace,
        per_w_trace,
        wall_time: start.elapsed(),
        converged,
        iterations,
        lambda: lag.lambda,
    })
}

/// One independent run per `lambda`, in input order.
pub fn lambda_sweep(pipeline: &Pipeline, cfg: &TrainConfig, lambdas: &[f64]) -> Result<Vec<TrainResult>> {
    if lambdas.is_empty() {
        return Err(Error::config("lambda list is empty"));
    }
    lambdas
        .iter()
        .map(|&l| {
            let mut c = cfg.clone();
            c.kind = ObjectiveKind::Rdf;
            c.lambda = l;
            train_rdf(pipeline, &c)
        })
        .collect()
}

/// Index of the result maximizing `score`; the first wins ties.
pub fn select_best<F>(results: &[TrainResult], mut score: F) -> Result<usize>
where
    F: FnMut(&TrainResult) -> Result<f64>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in results.iter().enumerate() {
        let s = score(r)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|b| b.0).ok_or_else(|| Error::config("no results to select from"))
}
