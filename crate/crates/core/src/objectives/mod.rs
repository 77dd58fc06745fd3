//! Objective values and their gradients in the model parameters.

mod evaluation;
mod pipeline;
mod preference;

pub use evaluation::EvalMdp;
pub use pipeline::{EvalMode, ModelFamily, Pipeline, Plan, PlannerConfig, PlannerKind};
pub use preference::{
    preference_grid, Density, GridWeighting, LagrangianConfig, PreferenceDist, PreferenceGrid,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{episode_return, Environment, Policy, Preference};
use crate::error::{check_finite, Error, Result};
use crate::models::{TransitionDataset, TransitionModel};
use crate::planning::QTable;

/// Mean and population standard deviation of `n_rollouts` episode returns
/// with seeds `seed, seed + 1, ...`. Deterministic policies use one episode.
pub fn policy_return(
    env: &dyn Environment,
    policy: &dyn Policy,
    w: &Preference,
    n_rollouts: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_rollouts == 0 {
        return Err(Error::config("n_rollouts must be at least 1"));
    }
    let n = if policy.is_deterministic() { 1 } else { n_rollouts };
    let returns: Vec<f64> = (0..n)
        .map(|i| episode_return(env, policy, w, seed.wrapping_add(i as u64)))
        .collect::<Result<_>>()?;
    let mean = returns.iter().sum::<f64>() / n as f64;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdfValue {
    pub value: f64,
    /// `(w, J(w))` over the preference grid, in grid order.
    pub per_w: Vec<(f64, f64)>,
    pub train: f64,
    pub average: f64,
}

/// Score at the training preference alone.
pub fn df_objective(pipeline: &Pipeline, theta: &[f64], w_train: f64, mode: EvalMode) -> Result<f64> {
    pipeline.evaluate(theta, w_train, mode)
}

struct Terms {
    points: Vec<f64>,
    /// Index of the training term in `points`.
    train_at: usize,
}

fn terms(grid: &PreferenceGrid, w_train: f64) -> Terms {
    let mut points = grid.points.clone();
    let train_at = match points.iter().position(|&w| w == w_train) {
        Some(i) => i,
        None => {
            points.push(w_train);
            points.len() - 1
        }
    };
    Terms { points, train_at }
}

fn validate(grid: &PreferenceGrid) -> Result<()> {
    if grid.is_empty() || grid.points.len() != grid.weights.len() {
        return Err(Error::config("preference grid must have one weight per point"));
    }
    Ok(())
}

fn assemble(grid: &PreferenceGrid, cfg: &LagrangianConfig, t: &Terms, values: &[f64]) -> RdfValue {
    let n = grid.len();
    let average = grid.average(&values[..n]);
    let train = values[t.train_at];
    RdfValue {
        value: average + cfg.lambda * train,
        per_w: grid.points.iter().copied().zip(values[..n].iter().copied()).collect(),
        train,
        average,
    }
}

/// Weighted grid average plus `lambda` times the training-preference score.
/// Grid terms are evaluated in parallel and combined in grid order.
pub fn rdf_objective(
    pipeline: &Pipeline,
    theta: &[f64],
    grid: &PreferenceGrid,
    cfg: &LagrangianConfig,
    mode: EvalMode,
) -> Result<RdfValue> {
    rdf_objective_warm(pipeline, theta, grid, cfg, mode, None).map(|(v, _)| v)
}

/// As [`rdf_objective`], warm-starting soft planning from `warm` (one table
/// per term) and returning the new tables.
pub fn rdf_objective_warm(
    pipeline: &Pipeline,
    theta: &[f64],
    grid: &PreferenceGrid,
    cfg: &LagrangianConfig,
    mode: EvalMode,
    warm: Option<&[QTable]>,
) -> Result<(RdfValue, Vec<QTable>)> {
    validate(grid)?;
    let t = terms(grid, cfg.w_train);
    let dm = pipeline.discretize(theta, false)?;
    let results: Vec<(f64, Option<QTable>)> = t
        .points
        .par_iter()
        .enumerate()
        .map(|(i, &w)| {
            let pref = Preference::scalar(w)?;
            let init = warm.and_then(|ws| ws.get(i));
            pipeline.evaluate_discretized(&dm, theta, &pref, mode, init)
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = results.iter().map(|r| r.0).collect();
    check_finite(&values, "objective terms")?;
    let tables = results.into_iter().filter_map(|r| r.1).collect();
    Ok((assemble(grid, cfg, &t, &values), tables))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GradientBackend {
    /// Central differences with step `max(rel_step * |theta_i|, min_step)`.
    FiniteDifference { rel_step: f64, min_step: f64 },
    /// Adjoint through the soft planner's fixed point.
    #[default]
    Implicit,
}

impl GradientBackend {
    pub fn finite_difference() -> Self {
        GradientBackend::FiniteDifference { rel_step: 1e-3, min_step: 1e-4 }
    }
}

#[derive(Debug, Clone)]
pub struct GradientResult {
    pub value: RdfValue,
    pub grad: Vec<f64>,
    pub tables: Vec<QTable>,
}

/// Gradient of the soft objective at temperature `tau`.
pub fn rdf_gradient(
    pipeline: &Pipeline,
    theta: &[f64],
    grid: &PreferenceGrid,
    cfg: &LagrangianConfig,
    backend: GradientBackend,
    tau: f64,
) -> Result<GradientResult> {
    rdf_gradient_warm(pipeline, theta, grid, cfg, backend, tau, None)
}

pub fn rdf_gradient_warm(
    pipeline: &Pipeline,
    theta: &[f64],
    grid: &PreferenceGrid,
    cfg: &LagrangianConfig,
    backend: GradientBackend,
    tau: f64,
    warm: Option<&[QTable]>,
) -> Result<GradientResult> {
    validate(grid)?;
    let mode = EvalMode::Soft(tau);
    let result = match backend {
        GradientBackend::FiniteDifference { rel_step, min_step } => {
            if !(rel_step > 0.0 && min_step > 0.0) {
                return Err(Error::config("finite-difference steps must be positive"));
            }
            if theta.len() > 64 {
                log::warn!("finite differences over {} parameters", theta.len());
            }
            let (value, tables) = rdf_objective_warm(pipeline, theta, grid, cfg, mode, warm)?;
            let mut grad = vec![0.0; theta.len()];
            for i in 0..theta.len() {
                let h = (rel_step * theta[i].abs()).max(min_step);
                let mut plus = theta.to_vec();
                let mut minus = theta.to_vec();
                plus[i] += h;
                minus[i] -= h;
                let jp = rdf_objective_warm(pipeline, &plus, grid, cfg, mode, Some(&tables))?.0.value;
                let jm = rdf_objective_warm(pipeline, &minus, grid, cfg, mode, Some(&tables))?.0.value;
                grad[i] = (jp - jm) / (2.0 * h);
            }
            GradientResult { value, grad, tables }
        }
        GradientBackend::Implicit => {
            let t = terms(grid, cfg.w_train);
            let dm = pipeline.discretize(theta, true)?;
            let parts: Vec<(f64, Vec<f64>, QTable)> = t
                .points
                .par_iter()
                .enumerate()
                .map(|(i, &w)| {
                    let pref = Preference::scalar(w)?;
                    let init = warm.and_then(|ws| ws.get(i));
                    pipeline.soft_value_and_grad(&dm, &pref, tau, init)
                })
                .collect::<Result<_>>()?;
            let values: Vec<f64> = parts.iter().map(|p| p.0).collect();
            check_finite(&values, "objective terms")?;
            let mut grad = vec![0.0; theta.len()];
            for (i, part) in parts.iter().enumerate() {
                let mut coef = if i < grid.len() { grid.weights[i] } else { 0.0 };
                if i == t.train_at {
                    coef += cfg.lambda;
                }
                for (g, x) in grad.iter_mut().zip(&part.1) {
                    *g += coef * x;
                }
            }
            let value = assemble(grid, cfg, &t, &values);
            GradientResult { value, grad, tables: parts.into_iter().map(|p| p.2).collect() }
        }
    };
    for (i, g) in result.grad.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFinite { context: "objective gradient".into(), index: i });
        }
    }
    Ok(result)
}

/// Central-difference derivative of the soft objective along `dir`.
pub fn directional_derivative(
    pipeline: &Pipeline,
    theta: &[f64],
    dir: &[f64],
    grid: &PreferenceGrid,
    cfg: &LagrangianConfig,
    tau: f64,
    h: f64,
) -> Result<f64> {
    let mode = EvalMode::Soft(tau);
    let shift = |sign: f64| -> Vec<f64> { theta.iter().zip(dir).map(|(t, d)| t + sign * h * d).collect() };
    let jp = rdf_objective(pipeline, &shift(1.0), grid, cfg, mode)?.value;
    let jm = rdf_objective(pipeline, &shift(-1.0), grid, cfg, mode)?.value;
    Ok((jp - jm) / (2.0 * h))
}

/// Negative mean squared prediction error (point models) or mean
/// log-likelihood (tabular), and its gradient over all model parameters.
pub fn mle_objective_and_gradient(model: &TransitionModel, data: &TransitionDataset) -> Result<(f64, Vec<f64>)> {
    if data.records.is_empty() {
        return Err(Error::config("cannot score a model on an empty dataset"));
    }
    let n = data.records.len() as f64;
    let mut grad = vec![0.0; model.n_params()];
    let mut total = 0.0;
    match model {
        TransitionModel::SharedScalar(m) => {
            for t in &data.records {
                let v = &m.action_vectors[t.a.0];
                for d in 0..t.s.len() {
                    let r = t.next[d] - t.s[d] - m.c * v[d];
                    total -= r * r;
                    grad[0] += 2.0 * r * v[d];
                }
            }
        }
        TransitionModel::Linear(m) => {
            let mut jac = Vec::new();
            for t in &data.records {
                let pred = m.predict(&t.s, t.a);
                let res: Vec<f64> = t.next.iter().zip(&pred).map(|(y, p)| y - p).collect();
                total -= res.iter().map(|r| r * r).sum::<f64>();
                jac.clear();
                m.jacobian(&t.s, t.a, &mut jac);
                for &(p, row, v) in &jac {
                    grad[p] += 2.0 * res[row] * v;
                }
            }
        }
        TransitionModel::Tabular(m) => {
            for t in &data.records {
                let (cell, _) = m.grid().nearest(&t.s);
                let (next, _) = m.grid().nearest(&t.next);
                let slots = m.slots(cell, t.a);
                let base = m.block(cell, t.a);
                let hit = slots
                    .iter()
                    .find(|s| s.1 == next)
                    .map(|s| s.0)
                    .unwrap_or_else(|| nearest_slot(&slots, m, next));
                for &(k, _, p) in &slots {
                    if k == hit {
                        total += p.max(1e-300).ln();
                        grad[base + k] += 1.0;
                    }
                    grad[base + k] -= p;
                }
            }
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((total / n, grad))
}

fn nearest_slot(slots: &[(usize, usize, f64)], m: &crate::models::TabularModel, next: usize) -> usize {
    let target = m.grid().node_state(next);
    slots
        .iter()
        .min_by(|a, b| {
            let da: f64 = m.grid().node_state(a.1).iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum();
            let db: f64 = m.grid().node_state(b.1).iter().zip(&target).map(|(x, y)| (x - y).powi(2)).sum();
            da.total_cmp(&db)
        })
        .map(|s| s.0)
        .unwrap_or(0)
}
