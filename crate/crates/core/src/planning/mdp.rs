use std::sync::Arc;

use crate::error::{Error, Result};

/// Sparse transition structure: one row per `(state, action)`, rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions {
    pub n_states: usize,
    pub n_actions: usize,
    pub row_ptr: Vec<usize>,
    pub next: Vec<usize>,
    pub prob: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl Transitions {
    pub fn n_rows(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn row(&self, s: usize, a: usize) -> std::ops::Range<usize> {
        let r = s * self.n_actions + a;
        self.row_ptr[r]..self.row_ptr[r + 1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.row_ptr.len() != self.n_rows() + 1 || self.terminal.len() != self.n_states {
            return Err(Error::contract("transition table has inconsistent lengths"));
        }
        for r in 0..self.n_rows() {
            let range = self.row_ptr[r]..self.row_ptr[r + 1];
            let total: f64 = self.prob[range.clone()].iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::contract(format!("transition row {r} sums to {total}")));
            }
            if self.next[range].iter().any(|&j| j >= self.n_states) {
                return Err(Error::contract(format!("transition row {r} leaves the state space")));
            }
        }
        Ok(())
    }
}

/// Finite MDP with per-successor rewards. Terminal states self-loop with zero reward.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMdp {
    pub transitions: Arc<Transitions>,
    /// Reward of each stored successor entry.
    pub reward: Vec<f64>,
    pub gamma: f64,
}

impl DiscreteMdp {
    pub fn new(transitions: Arc<Transitions>, reward: Vec<f64>, gamma: f64) -> Result<Self> {
        if reward.len() != transitions.next.len() {
            return Err(Error::contract("one reward per transition entry is required"));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::config(format!("discount {gamma} outside [0, 1]")));
        }
        Ok(DiscreteMdp { transitions, reward, gamma })
    }

    /// Builds from dense `p[s][a][s']` and `r[s][a]` tables.
    pub fn from_dense(p: &[Vec<Vec<f64>>], r: &[Vec<f64>], gamma: f64, terminal: &[bool]) -> Result<Self> {
        let n = p.len();
        let k = p.first().map_or(0, Vec::len);
        let mut t = Transitions {
            n_states: n,
            n_actions: k,
            row_ptr: vec![0],
            next: vec![],
            prob: vec![],
            terminal: terminal.to_vec(),
        };
        let mut reward = vec![];
        for s in 0..n {
            for a in 0..k {
                if terminal[s] {
                    t.next.push(s);
                    t.prob.push(1.0);
                    reward.push(0.0);
                } else {
                    for (j, &pj) in p[s][a].iter().enumerate() {
                        if pj != 0.0 {
                            t.next.push(j);
                            t.prob.push(pj);
                            reward.push(r[s][a]);
                        }
                    }
                }
                t.row_ptr.push(t.next.len());
            }
        }
        t.validate()?;
        DiscreteMdp::new(Arc::new(t), reward, gamma)
    }

    pub fn n_states(&self) -> usize {
        self.transitions.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.transitions.n_actions
    }

    /// Expected immediate reward per `(state, action)`.
    pub fn reward_table(&self) -> Vec<f64> {
        let t = &self.transitions;
        (0..t.n_rows())
            .map(|r| {
                (t.row_ptr[r]..t.row_ptr[r + 1])
                    .map(|e| t.prob[e] * self.reward[e])
                    .sum()
            })
            .collect()
    }

    /// Dense `N x actions x N` transition tensor.
    pub fn dense_transitions(&self) -> Vec<Vec<Vec<f64>>> {
        let t = &self.transitions;
        let mut out = vec![vec![vec![0.0; t.n_states]; t.n_actions]; t.n_states];
        for s in 0..t.n_states {
            for a in 0..t.n_actions {
                for e in t.row(s, a) {
                    out[s][a][t.next[e]] += t.prob[e];
                }
            }
        }
        out
    }
}
