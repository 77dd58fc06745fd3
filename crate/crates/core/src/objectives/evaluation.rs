//! Finite-horizon evaluation chains built from the true simulator, used to
//! score softmax policies exactly.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::envs::{Action, Environment, Preference};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::planning::{softmax_row, Lookup, QTable};

/// True dynamics over a finite state set, plus how each state reads the
/// planner's Q values.
#[derive(Debug, Clone)]
pub struct EvalMdp {
    pub n_states: usize,
    pub n_actions: usize,
    pub n_bases: usize,
    pub row_ptr: Vec<usize>,
    pub next: Vec<usize>,
    pub prob: Vec<f64>,
    pub basis: Vec<f64>,
    pub terminal: Vec<bool>,
    pub initial: Vec<(usize, f64)>,
    pub horizon: usize,
    pub gamma: f64,
    /// Planning-grid weights for each state.
    pub lookup: Vec<Vec<(usize, f64)>>,
}

impl EvalMdp {
    /// Exhaustive enumeration of the states reachable within the horizon.
    /// Only suitable for deterministic environments with a small reachable set.
    pub fn enumerate(env: &dyn Environment, grid: &GridSpec, lookup: Lookup, max_states: usize) -> Result<Self> {
        let spec = env.spec();
        let (k, nb) = (spec.n_actions, spec.n_bases);
        let key = |s: &[f64]| s.iter().map(|x| x.to_bits()).collect::<Vec<u64>>();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut states = vec![env.initial_state()];
        let mut depth = vec![0usize];
        index.insert(key(&states[0]), 0);
        let mut row_ptr = vec![0];
        let (mut next, mut prob, mut basis) = (vec![], vec![], vec![]);
        let mut terminal = vec![];
        let mut i = 0;
        while i < states.len() {
            let s = states[i].clone();
            let term = env.is_terminal(&s) || depth[i] >= spec.horizon;
            terminal.push(env.is_terminal(&s));
            for a in 0..k {
                if term {
                    next.push(i);
                    prob.push(1.0);
                    basis.extend(std::iter::repeat_n(0.0, nb));
                } else {
                    let n = env.transition(&s, Action(a));
                    let b = env.reward_bases(&s, Action(a), &n);
                    let j = match index.get(&key(&n)) {
                        Some(&j) => j,
                        None => {
                            if states.len() >= max_states {
                                return Err(Error::config(format!(
                                    "reachable set exceeds {max_states} states"
                                )));
                            }
                            states.push(n.clone());
                            depth.push(depth[i] + 1);
                            index.insert(key(&n), states.len() - 1);
                            states.len() - 1
                        }
                    };
                    next.push(j);
                    prob.push(1.0);
                    basis.extend(b);
                }
                row_ptr.push(next.len());
            }
            i += 1;
        }
        let lookup = states.iter().map(|s| lookup.weights(grid, s)).collect();
        Ok(EvalMdp {
            n_states: states.len(),
            n_actions: k,
            n_bases: nb,
            row_ptr,
            next,
            prob,
            basis,
            terminal,
            initial: vec![(0, 1.0)],
            horizon: spec.horizon,
            gamma: spec.gamma,
            lookup,
        })
    }

    /// True transitions from every node of `eval_grid`, projected back onto
    /// it multilinearly. Terminal successors go to one absorbing exit state.
    pub fn gridded(env: &dyn Environment, eval_grid: &GridSpec, plan_grid: &GridSpec, lookup: Lookup) -> Result<Self> {
        let spec = env.spec();
        if eval_grid.dim() != spec.state_dim {
            return Err(Error::config("evaluation grid dimension differs from the environment"));
        }
        let (k, nb) = (spec.n_actions, spec.n_bases);
        let n = eval_grid.len();
        let sink = n;
        type Rows = Vec<(Vec<(usize, f64)>, Vec<f64>)>;
        let rows: Vec<(bool, Rows)> = (0..n)
            .into_par_iter()
            .map(|node| {
                let s = eval_grid.node_state(node);
                if env.is_terminal(&s) {
                    return (true, vec![(vec![(node, 1.0)], vec![0.0; nb]); k]);
                }
                let rows = (0..k)
                    .map(|a| {
                        let nx = env.transition(&s, Action(a));
                        let b = env.reward_bases(&s, Action(a), &nx);
                        let succ = if env.is_terminal(&nx) {
                            vec![(sink, 1.0)]
                        } else {
                            eval_grid.interpolate(&nx).corners
                        };
                        (succ, b)
                    })
                    .collect();
                (false, rows)
            })
            .collect();
        let mut row_ptr = vec![0];
        let (mut next, mut prob, mut basis) = (vec![], vec![], vec![]);
        let mut terminal = Vec::with_capacity(n + 1);
        for (term, node_rows) in rows {
            terminal.push(term);
            for (succ, b) in node_rows {
                for (j, p) in succ {
                    next.push(j);
                    prob.push(p);
                    basis.extend_from_slice(&b);
                }
                row_ptr.push(next.len());
            }
        }
        terminal.push(true);
        for _ in 0..k {
            next.push(sink);
            prob.push(1.0);
            basis.extend(std::iter::repeat_n(0.0, nb));
            row_ptr.push(next.len());
        }
        let mut lookups: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|node| lookup.weights(plan_grid, &eval_grid.node_state(node)))
            .collect();
        lookups.push(Vec::new());
        let initial = eval_grid.interpolate(&env.initial_state()).corners;
        Ok(EvalMdp {
            n_states: n + 1,
            n_actions: k,
            n_bases: nb,
            row_ptr,
            next,
            prob,
            basis,
            terminal,
            initial,
            horizon: spec.horizon,
            gamma: spec.gamma,
            lookup: lookups,
        })
    }

    fn rewards(&self, w: &Preference) -> Vec<f64> {
        let wk = w.weights();
        self.basis
            .chunks(self.n_bases)
            .map(|b| b.iter().zip(wk).map(|(x, y)| x * y).sum())
            .collect()
    }

    fn policy(&self, q: &QTable, tau: f64) -> Vec<f64> {
        let k = self.n_actions;
        let mut out = vec![0.0; self.n_states * k];
        out.par_chunks_mut(k).enumerate().for_each(|(e, p)| {
            if self.lookup[e].is_empty() {
                p.iter_mut().for_each(|x| *x = 1.0 / k as f64);
                return;
            }
            let mut z = vec![0.0; k];
            for &(node, w) in &self.lookup[e] {
                for (zi, qi) in z.iter_mut().zip(q.row(node)) {
                    *zi += w * qi;
                }
            }
            p.copy_from_slice(&softmax_row(&z, tau));
        });
        out
    }

    fn q_remaining(&self, r: &[f64], v: &[f64], s: usize, a: usize) -> f64 {
        let row = s * self.n_actions + a;
        (self.row_ptr[row]..self.row_ptr[row + 1])
            .map(|e| self.prob[e] * (r[e] + self.gamma * v[self.next[e]]))
            .sum()
    }

    /// Backward induction: `values[h][s]` is the expected return with `h` steps left.
    fn values(&self, r: &[f64], pi: &[f64]) -> Vec<Vec<f64>> {
        let k = self.n_actions;
        let mut values = Vec::with_capacity(self.horizon + 1);
        values.push(vec![0.0; self.n_states]);
        for h in 1..=self.horizon {
            let prev = &values[h - 1];
            let cur: Vec<f64> = (0..self.n_states)
                .into_par_iter()
                .map(|s| {
                    if self.terminal[s] {
                        return 0.0;
                    }
                    (0..k).map(|a| pi[s * k + a] * self.q_remaining(r, prev, s, a)).sum()
                })
                .collect();
            let settled = cur == *prev;
            values.push(cur);
            if settled {
                // Stationary from here on.
                let last = values[h].clone();
                while values.len() <= self.horizon {
                    values.push(last.clone());
                }
                break;
            }
        }
        values
    }

    /// Expected return of the Boltzmann policy over `q` at temperature `tau`.
    pub fn soft_return(&self, q: &QTable, w: &Preference, tau: f64) -> f64 {
        let r = self.rewards(w);
        let pi = self.policy(q, tau);
        let values = self.values(&r, &pi);
        let top = &values[self.horizon];
        self.initial.iter().map(|&(s, p)| p * top[s]).sum()
    }

    /// Expected return and its gradient with respect to every planner Q value.
    pub fn soft_return_grad(&self, q: &QTable, w: &Preference, tau: f64) -> (f64, Vec<f64>) {
        let k = self.n_actions;
        let r = self.rewards(w);
        let pi = self.policy(q, tau);
        let values = self.values(&r, &pi);
        let ret: f64 = self.initial.iter().map(|&(s, p)| p * values[self.horizon][s]).sum();

        let mut gz = vec![0.0; self.n_states * k];
        let mut d = vec![0.0; self.n_states];
        for &(s, p) in &self.initial {
            d[s] += p;
        }
        for t in 0..self.horizon {
            let h = self.horizon - t;
            let mut nd = vec![0.0; self.n_states];
            let mut any = false;
            for s in 0..self.n_states {
                if d[s] == 0.0 || self.terminal[s] {
                    continue;
                }
                any = true;
                let vh = values[h][s];
                for a in 0..k {
                    let pa = pi[s * k + a];
                    let qa = self.q_remaining(&r, &values[h - 1], s, a);
                    gz[s * k + a] += d[s] * pa * (qa - vh);
                    let row = s * k + a;
                    for e in self.row_ptr[row]..self.row_ptr[row + 1] {
                        nd[self.next[e]] += d[s] * pa * self.prob[e] * self.gamma;
                    }
                }
            }
            d = nd;
            if !any {
                break;
            }
        }

        let mut gq = vec![0.0; q.values.len()];
        for s in 0..self.n_states {
            for &(node, lw) in &self.lookup[s] {
                for a in 0..k {
                    gq[node * k + a] += lw * gz[s * k + a] / tau;
                }
            }
        }
        (ret, gq)
    }
}
