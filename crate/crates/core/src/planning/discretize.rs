use std::sync::Arc;

use rayon::prelude::*;

use super::{DiscreteMdp, Transitions};
use crate::envs::{Action, Environment, Preference};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::models::TransitionModel;

/// Sensitivity of the discretized model to the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelGrad {
    /// Point-prediction models: sparse `d prob_e / d theta_p` per entry and
    /// `d r_k / d theta_p` per row.
    Point {
        n_params: usize,
        entry_ptr: Vec<usize>,
        param: Vec<u32>,
        dprob: Vec<f64>,
        row_ptr: Vec<usize>,
        rparam: Vec<u32>,
        /// `n_bases` values per `rparam` item.
        dreward: Vec<f64>,
    },
    /// Tabular softmax rows: entry `e` has probability `softmax(z)[e]` and
    /// owns logit `entry_param[e]`.
    Softmax { n_params: usize, entry_param: Vec<usize> },
}

impl ModelGrad {
    pub fn n_params(&self) -> usize {
        match self {
            ModelGrad::Point { n_params, .. } | ModelGrad::Softmax { n_params, .. } => *n_params,
        }
    }
}

/// A model projected onto grid nodes, with reward bases kept separate so
/// that any preference can be planned without rebuilding transitions.
#[derive(Debug, Clone)]
pub struct DiscreteModel {
    pub transitions: Arc<Transitions>,
    pub n_bases: usize,
    /// `n_bases` values per transition entry.
    pub basis: Vec<f64>,
    pub gamma: f64,
    pub grad: Option<ModelGrad>,
    /// Grid node count. A point-prediction model adds one absorbing exit state after them.
    pub n_grid: usize,
    /// Predictions that fell outside the grid and were clamped.
    pub clamped: usize,
}

impl DiscreteModel {
    pub fn rewards(&self, w: &Preference) -> Result<Vec<f64>> {
        if w.len() != self.n_bases {
            return Err(Error::config("preference length does not match the reward bases"));
        }
        let wk = w.weights();
        Ok(self
            .basis
            .chunks(self.n_bases)
            .map(|b| b.iter().zip(wk).map(|(x, y)| x * y).sum())
            .collect())
    }

    pub fn mdp(&self, w: &Preference) -> Result<DiscreteMdp> {
        DiscreteMdp::new(self.transitions.clone(), self.rewards(w)?, self.gamma)
    }

    /// `dJ/dtheta = sum_rows nu(row) * dF(row)/dtheta` where `F` is the Bellman
    /// operator evaluated at successor values `v`.
    pub fn gradient(&self, mdp: &DiscreteMdp, w: &Preference, v: &[f64], nu: &[f64]) -> Result<Vec<f64>> {
        let grad = self
            .grad
            .as_ref()
            .ok_or_else(|| Error::contract("model was discretized without gradients"))?;
        let t = &self.transitions;
        let gamma = self.gamma;
        let target = |e: usize| mdp.reward[e] + gamma * v[t.next[e]];
        let mut out = vec![0.0; grad.n_params()];
        match grad {
            ModelGrad::Point { entry_ptr, param, dprob, row_ptr, rparam, dreward, .. } => {
                let wk = w.weights();
                for row in 0..t.n_rows() {
                    let scale = nu[row];
                    if scale == 0.0 {
                        continue;
                    }
                    for e in t.row_ptr[row]..t.row_ptr[row + 1] {
                        let g = target(e);
                        for i in entry_ptr[e]..entry_ptr[e + 1] {
                            out[param[i] as usize] += scale * dprob[i] * g;
                        }
                    }
                    for i in row_ptr[row]..row_ptr[row + 1] {
                        let dr: f64 = dreward[i * self.n_bases..(i + 1) * self.n_bases]
                            .iter()
                            .zip(wk)
                            .map(|(a, b)| a * b)
                            .sum();
                        out[rparam[i] as usize] += scale * dr;
                    }
                }
            }
            ModelGrad::Softmax { entry_param, .. } => {
                for row in 0..t.n_rows() {
                    let scale = nu[row];
                    if scale == 0.0 {
                        continue;
                    }
                    let range = t.row_ptr[row]..t.row_ptr[row + 1];
                    if entry_param[range.start] == usize::MAX {
                        continue;
                    }
                    let mean: f64 = range.clone().map(|e| t.prob[e] * target(e)).sum();
                    for e in range {
                        out[entry_param[e]] += scale * t.prob[e] * (target(e) - mean);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Default)]
struct NodeRows {
    row_len: Vec<usize>,
    next: Vec<usize>,
    prob: Vec<f64>,
    basis: Vec<f64>,
    entry_grad_len: Vec<usize>,
    gparam: Vec<u32>,
    gval: Vec<f64>,
    row_grad_len: Vec<usize>,
    rparam: Vec<u32>,
    dreward: Vec<f64>,
    entry_param: Vec<usize>,
    clamped: usize,
}

/// Projects `model` onto the nodes of `grid`. When `trainable` is given,
/// also records sensitivities to those flat parameter indices.
pub fn discretize(
    model: &TransitionModel,
    env: &dyn Environment,
    grid: &GridSpec,
    trainable: Option<&[usize]>,
) -> Result<DiscreteModel> {
    discretize_impl(Some(model), env, grid, trainable)
}

/// Projects the environment's own dynamics onto the nodes of `grid`.
pub fn discretize_true(env: &dyn Environment, grid: &GridSpec) -> Result<DiscreteModel> {
    discretize_impl(None, env, grid, None)
}

fn discretize_impl(
    model: Option<&TransitionModel>,
    env: &dyn Environment,
    grid: &GridSpec,
    trainable: Option<&[usize]>,
) -> Result<DiscreteModel> {
    let spec = env.spec();
    let oracle = TransitionModel::SharedScalar(crate::models::SharedScalarModel::axis_aligned(0.0, spec.state_dim));
    let use_env = model.is_none();
    let model = model.unwrap_or(&oracle);
    if grid.dim() != spec.state_dim || model.state_dim() != spec.state_dim {
        return Err(Error::config("grid, model and environment dimensions differ"));
    }
    if let TransitionModel::Tabular(m) = model {
        if m.grid() != grid {
            return Err(Error::config("a tabular model must be planned on its own grid"));
        }
    }
    let k = spec.n_actions;
    let nb = spec.n_bases;
    let dim = spec.state_dim;
    let n_grid = grid.len();
    let point = !matches!(model, TransitionModel::Tabular(_));
    let sink = n_grid;
    let n_states = if point { n_grid + 1 } else { n_grid };

    let mut slot_of = vec![u32::MAX; model.n_params()];
    if let Some(tr) = trainable {
        for (i, &p) in tr.iter().enumerate() {
            if p >= slot_of.len() {
                return Err(Error::config(format!("trainable index {p} out of range")));
            }
            slot_of[p] = i as u32;
        }
    }
    let with_grad = trainable.is_some();

    let build = |node: usize| -> NodeRows {
        let s = grid.node_state(node);
        let mut out = NodeRows::default();
        let terminal = env.is_terminal(&s);
        let mut jac: Vec<(usize, usize, f64)> = Vec::new();
        let mut basis = vec![0.0; nb];
        let mut rgrad = vec![0.0; nb * dim];
        for a in 0..k {
            let action = Action(a);
            let start = out.next.len();
            let rstart = out.rparam.len();
            if terminal {
                out.next.push(node);
                out.prob.push(1.0);
                out.basis.extend(std::iter::repeat_n(0.0, nb));
                out.entry_grad_len.push(0);
                out.entry_param.push(usize::MAX);
            } else if let TransitionModel::Tabular(m) = model {
                let base = m.block(node, action);
                for (slot, target, p) in m.slots(node, action) {
                    let ns = grid.node_state(target);
                    env.reward_bases_into(&s, action, &ns, &mut basis);
                    out.next.push(target);
                    out.prob.push(p);
                    out.basis.extend_from_slice(&basis);
                    out.entry_grad_len.push(0);
                    out.entry_param.push(base + slot);
                }
            } else {
                let pred = match model {
                    _ if use_env => env.transition(&s, action),
                    TransitionModel::SharedScalar(m) => m.predict(&s, action),
                    TransitionModel::Linear(m) => m.predict(&s, action),
                    TransitionModel::Tabular(_) => unreachable!(),
                };
                env.reward_bases_into(&s, action, &pred, &mut basis);
                jac.clear();
                if with_grad {
                    match model {
                        TransitionModel::SharedScalar(m) => {
                            for (d, &v) in m.action_vectors[a].iter().enumerate() {
                                if v != 0.0 {
                                    jac.push((0, d, v));
                                }
                            }
                        }
                        TransitionModel::Linear(m) => m.jacobian(&s, action, &mut jac),
                        TransitionModel::Tabular(_) => unreachable!(),
                    }
                    jac.retain(|&(p, _, _)| slot_of[p] != u32::MAX);
                    env.reward_next_grad(&s, action, &pred, &mut rgrad);
                    for &(p, d, v) in &jac {
                        let mut dr = vec![0.0; nb];
                        for (kk, x) in dr.iter_mut().enumerate() {
                            *x = rgrad[kk * dim + d] * v;
                        }
                        if dr.iter().any(|&x| x != 0.0) {
                            out.rparam.push(slot_of[p]);
                            out.dreward.extend_from_slice(&dr);
                        }
                    }
                }
                if env.is_terminal(&pred) {
                    out.next.push(sink);
                    out.prob.push(1.0);
                    out.basis.extend_from_slice(&basis);
                    out.entry_grad_len.push(0);
                    out.entry_param.push(usize::MAX);
                } else {
                    let mut need = vec![false; dim];
                    for &(_, d, _) in &jac {
                        need[d] = true;
                    }
                    let interp = if with_grad {
                        grid.interpolate_grad(&pred, &need)
                    } else {
                        grid.interpolate(&pred)
                    };
                    out.clamped += interp.clamped as usize;
                    for (ci, &(target, p)) in interp.corners.iter().enumerate() {
                        out.next.push(target);
                        out.prob.push(p);
                        out.basis.extend_from_slice(&basis);
                        out.entry_param.push(usize::MAX);
                        let mut count = 0;
                        if with_grad {
                            let dw = &interp.grad[ci * dim..(ci + 1) * dim];
                            let before = out.gparam.len();
                            for &(p_idx, d, v) in &jac {
                                let g = dw[d] * v;
                                if g != 0.0 {
                                    let slot = slot_of[p_idx];
                                    if let Some(pos) = out.gparam[before..].iter().position(|&x| x == slot) {
                                        out.gval[before + pos] += g;
                                    } else {
                                        out.gparam.push(slot);
                                        out.gval.push(g);
                                    }
                                }
                            }
                            count = out.gparam.len() - before;
                        }
                        out.entry_grad_len.push(count);
                    }
                }
            }
            out.row_len.push(out.next.len() - start);
            out.row_grad_len.push(out.rparam.len() - rstart);
        }
        out
    };

    let nodes: Vec<NodeRows> = (0..n_grid).into_par_iter().map(build).collect();

    let mut t = Transitions {
        n_states,
        n_actions: k,
        row_ptr: vec![0],
        next: vec![],
        prob: vec![],
        terminal: vec![false; n_states],
    };
    let mut basis = Vec::new();
    let mut entry_ptr = vec![0];
    let mut gparam = Vec::new();
    let mut gval = Vec::new();
    let mut rrow_ptr = vec![0];
    let mut rparam = Vec::new();
    let mut dreward = Vec::new();
    let mut entry_param = Vec::new();
    let mut clamped = 0;
    for (node, rows) in nodes.into_iter().enumerate() {
        t.terminal[node] = env.is_terminal(&grid.node_state(node));
        let mut offset = t.next.len();
        for len in rows.row_len {
            offset += len;
            t.row_ptr.push(offset);
        }
        t.next.extend(rows.next);
        t.prob.extend(rows.prob);
        basis.extend(rows.basis);
        for len in rows.entry_grad_len {
            entry_ptr.push(entry_ptr.last().unwrap() + len);
        }
        gparam.extend(rows.gparam);
        gval.extend(rows.gval);
        for len in rows.row_grad_len {
            rrow_ptr.push(rrow_ptr.last().unwrap() + len);
        }
        rparam.extend(rows.rparam);
        dreward.extend(rows.dreward);
        entry_param.extend(rows.entry_param);
        clamped += rows.clamped;
    }
    if point {
        t.terminal[sink] = true;
        for _ in 0..k {
            t.next.push(sink);
            t.prob.push(1.0);
            basis.extend(std::iter::repeat_n(0.0, nb));
            entry_ptr.push(*entry_ptr.last().unwrap());
            entry_param.push(usize::MAX);
            t.row_ptr.push(t.next.len());
            rrow_ptr.push(*rrow_ptr.last().unwrap());
        }
    }
    if clamped > 0 {
        log::debug!("{clamped} model predictions were clamped onto the grid");
    }

    let grad = trainable.map(|tr| {
        if point {
            ModelGrad::Point {
                n_params: tr.len(),
                entry_ptr,
                param: gparam,
                dprob: gval,
                row_ptr: rrow_ptr,
                rparam,
                dreward,
            }
        } else {
            ModelGrad::Softmax { n_params: model.n_params(), entry_param }
        }
    });
    if let (Some(ModelGrad::Softmax { .. }), Some(tr)) = (&grad, trainable) {
        if tr.len() != model.n_params() || tr.iter().enumerate().any(|(i, &p)| i != p) {
            return Err(Error::config("tabular models train every logit"));
        }
    }

    Ok(DiscreteModel {
        transitions: Arc::new(t),
        n_bases: nb,
        basis,
        gamma: spec.gamma,
        grad,
        n_grid,
        clamped,
    })
}

/// Discretizes and scalarizes in one call.
pub fn discretize_mdp(
    model: &TransitionModel,
    env: &dyn Environment,
    grid: &GridSpec,
    w: &Preference,
) -> Result<DiscreteMdp> {
    discretize(model, env, grid, None)?.mdp(w)
}
