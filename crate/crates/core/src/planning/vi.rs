use rayon::prelude::*;

use super::DiscreteMdp;
use crate::error::{check_finite, Error, Result};

const PAR_MIN_STATES: usize = 4096;

#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub values: Vec<f64>,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
    /// Sup-norm Bellman residual after each sweep.
    pub residuals: Vec<f64>,
}

impl QTable {
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn state_values(&self, tau: Option<f64>) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| match tau {
                Some(t) => soft_max(self.row(s), t),
                None => hard_max(self.row(s)),
            })
            .collect()
    }
}

pub(crate) fn hard_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// `tau * log sum exp(row / tau)`.
pub(crate) fn soft_max(row: &[f64], tau: f64) -> f64 {
    let m = hard_max(row);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = row.iter().map(|q| ((q - m) / tau).exp()).sum();
    m + tau * s.ln()
}

fn sweep(mdp: &DiscreteMdp, v: &[f64], q: &mut [f64]) {
    let t = &mdp.transitions;
    let k = t.n_actions;
    let fill = |(s, out): (usize, &mut [f64])| {
        if t.terminal[s] {
            out.iter_mut().for_each(|x| *x = 0.0);
            return;
        }
        for (a, x) in out.iter_mut().enumerate() {
            *x = t
                .row(s, a)
                .map(|e| t.prob[e] * (mdp.reward[e] + mdp.gamma * v[t.next[e]]))
                .sum();
        }
    };
    if t.n_states >= PAR_MIN_STATES {
        q.par_chunks_mut(k).enumerate().for_each(fill);
    } else {
        q.chunks_mut(k).enumerate().for_each(fill);
    }
}

fn iterate(
    mdp: &DiscreteMdp,
    tau: Option<f64>,
    tol: f64,
    max_iters: usize,
    init: Option<&[f64]>,
) -> QTable {
    let n = mdp.n_states();
    let k = mdp.n_actions();
    let mut q = match init {
        Some(q0) if q0.len() == n * k => q0.to_vec(),
        _ => vec![0.0; n * k],
    };
    let mut next = vec![0.0; n * k];
    let mut v = vec![0.0; n];
    let mut residuals = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        for (s, vs) in v.iter_mut().enumerate() {
            let row = &q[s * k..(s + 1) * k];
            *vs = if mdp.transitions.terminal[s] {
                0.0
            } else {
                match tau {
                    Some(t) => soft_max(row, t),
                    None => hard_max(row),
                }
            };
        }
        sweep(mdp, &v, &mut next);
        let res = q
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        std::mem::swap(&mut q, &mut next);
        residuals.push(res);
        if !res.is_finite() {
            break;
        }
        if res < tol {
            converged = true;
            break;
        }
    }
    QTable {
        n_states: n,
        n_actions: k,
        values: q,
        converged,
        residual: residuals.last().copied().unwrap_or(f64::INFINITY),
        iterations: residuals.len(),
        residuals,
    }
}

/// Hard Bellman iteration until the sup-norm residual drops below `tol`.
pub fn value_iteration(mdp: &DiscreteMdp, tol: f64, max_iters: usize) -> QTable {
    iterate(mdp, None, tol, max_iters, None)
}

/// Entropy-regularized iteration with a `tau`-scaled log-sum-exp backup.
pub fn soft_value_iteration(mdp: &DiscreteMdp, tau: f64, tol: f64, max_iters: usize) -> Result<QTable> {
    soft_value_iteration_from(mdp, tau, tol, max_iters, None)
}

/// As [`soft_value_iteration`], starting from `init` when its shape matches.
pub fn soft_value_iteration_from(
    mdp: &DiscreteMdp,
    tau: f64,
    tol: f64,
    max_iters: usize,
    init: Option<&[f64]>,
) -> Result<QTable> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config(format!("temperature must be positive, got {tau}")));
    }
    Ok(iterate(mdp, Some(tau), tol, max_iters, init))
}

/// As [`value_iteration`], starting from `init` when its shape matches.
pub fn value_iteration_from(mdp: &DiscreteMdp, tol: f64, max_iters: usize, init: Option<&[f64]>) -> QTable {
    iterate(mdp, None, tol, max_iters, init)
}

/// Boltzmann probabilities of one Q row.
pub fn softmax_row(row: &[f64], tau: f64) -> Vec<f64> {
    let m = hard_max(row);
    let mut p: Vec<f64> = row.iter().map(|q| ((q - m) / tau).exp()).collect();
    let z: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= z);
    p
}

/// Solves `nu = g + M^T nu` where `M` is the Jacobian of the soft Bellman
/// operator at its fixed point `q`. Then for any parameter `x` of the MDP,
/// `dJ/dx = nu . dF/dx` when `g = dJ/dQ`.
pub fn soft_vi_adjoint(
    mdp: &DiscreteMdp,
    q: &QTable,
    tau: f64,
    g: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let t = &mdp.transitions;
    let (n, k) = (t.n_states, t.n_actions);
    if g.len() != n * k || q.values.len() != n * k {
        return Err(Error::contract("adjoint inputs do not match the MDP shape"));
    }
    let pi: Vec<f64> = (0..n).flat_map(|s| softmax_row(q.row(s), tau)).collect();
    let mut nu = g.to_vec();
    let mut y = vec![0.0; n];
    let mut last = f64::INFINITY;
    for it in 0..max_iters {
        y.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..n {
            if t.terminal[s] {
                continue;
            }
            for a in 0..k {
                let w = nu[s * k + a];
                if w == 0.0 {
                    continue;
                }
                for e in t.row(s, a) {
                    y[t.next[e]] += t.prob[e] * w;
                }
            }
        }
        let mut change: f64 = 0.0;
        for j in 0..n {
            for b in 0..k {
                let idx = j * k + b;
                let val = if t.terminal[j] {
                    g[idx]
                } else {
                    g[idx] + mdp.gamma * pi[idx] * y[j]
                };
                change = change.max((val - nu[idx]).abs());
                nu[idx] = val;
            }
        }
        last = change;
        if !change.is_finite() {
            break;
        }
        let scale = nu.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if change <= tol * scale {
            check_finite(&nu, "adjoint solution")?;
            return Ok(nu);
        }
        if it + 1 == max_iters {
            break;
        }
    }
    Err(Error::Divergence {
        what: "adjoint solve".into(),
        iterations: max_iters,
        residual: last,
    })
}
