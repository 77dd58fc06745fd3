use serde::{Deserialize, Serialize};

use super::vi::softmax_row;
use super::{FqiWeights, QTable};
use crate::envs::{sample_action, Action, Policy};
use crate::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    Greedy,
    Softmax(f64),
}

/// Greedy breaks ties toward the lowest action index.
pub fn action_distribution(q: &[f64], mode: PolicyMode) -> Vec<f64> {
    match mode {
        PolicyMode::Greedy => {
            let mut best = 0;
            for (a, &v) in q.iter().enumerate() {
                if v > q[best] {
                    best = a;
                }
            }
            let mut p = vec![0.0; q.len()];
            p[best] = 1.0;
            p
        }
        PolicyMode::Softmax(tau) => softmax_row(q, tau),
    }
}

pub fn greedy_action(q: &[f64]) -> Action {
    let mut best = 0;
    for (a, &v) in q.iter().enumerate() {
        if v > q[best] {
            best = a;
        }
    }
    Action(best)
}

/// Action probabilities for every state of a finite MDP.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    pub n_actions: usize,
    pub probs: Vec<f64>,
    pub mode: PolicyMode,
}

impl TabularPolicy {
    pub fn probs(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }
}

pub fn extract_policy(q: &QTable, mode: PolicyMode) -> TabularPolicy {
    let probs = (0..q.n_states)
        .flat_map(|s| action_distribution(q.row(s), mode))
        .collect();
    TabularPolicy { n_actions: q.n_actions, probs, mode }
}

/// How a continuous state reads the Q values stored at grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Lookup {
    Nearest,
    #[default]
    Multilinear,
}

impl Lookup {
    pub fn weights(self, grid: &GridSpec, s: &[f64]) -> Vec<(usize, f64)> {
        match self {
            Lookup::Nearest => vec![(grid.nearest(s).0, 1.0)],
            Lookup::Multilinear => grid.interpolate(s).corners,
        }
    }
}

/// Policy over continuous states backed by a Q table on grid nodes.
#[derive(Debug, Clone)]
pub struct GridPolicy {
    pub grid: GridSpec,
    pub lookup: Lookup,
    pub q: QTable,
    pub mode: PolicyMode,
}

impl GridPolicy {
    pub fn q_at(&self, s: &[f64]) -> Vec<f64> {
        let k = self.q.n_actions;
        let mut out = vec![0.0; k];
        for (node, w) in self.lookup.weights(&self.grid, s) {
            for (o, q) in out.iter_mut().zip(self.q.row(node)) {
                *o += w * q;
            }
        }
        out
    }
}

impl Policy for GridPolicy {
    fn action_probs(&self, s: &[f64]) -> Vec<f64> {
        action_distribution(&self.q_at(s), self.mode)
    }

    fn is_deterministic(&self) -> bool {
        self.mode == PolicyMode::Greedy
    }

    fn act(&self, s: &[f64], rng: &mut rand_chacha::ChaCha8Rng) -> Action {
        match self.mode {
            PolicyMode::Greedy => greedy_action(&self.q_at(s)),
            PolicyMode::Softmax(_) => {
                let probs = self.action_probs(s);
                sample_action(&probs, rng)
            }
        }
    }
}

/// Policy backed by fitted Q weights.
#[derive(Debug, Clone)]
pub struct FqiPolicy {
    pub weights: FqiWeights,
    pub mode: PolicyMode,
}

impl Policy for FqiPolicy {
    fn action_probs(&self, s: &[f64]) -> Vec<f64> {
        action_distribution(&self.weights.q_values(s), self.mode)
    }

    fn is_deterministic(&self) -> bool {
        self.mode == PolicyMode::Greedy
    }

    fn act(&self, s: &[f64], rng: &mut rand_chacha::ChaCha8Rng) -> Action {
        match self.mode {
            PolicyMode::Greedy => greedy_action(&self.weights.q_values(s)),
            PolicyMode::Softmax(_) => sample_action(&self.action_probs(s), rng),
        }
    }
}
