//! True-environment simulators and reward bases.

pub mod cancer;
pub mod mountain_car;
pub mod toy;

pub use cancer::{cancer_reward_bases, CancerEnv, CancerParams};
pub use mountain_car::{mountain_car_reward_bases, MountainCarEnv, MountainCarParams};
pub use toy::{toy_reward_bases, ToyEnv, ToyParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateVec = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Action(pub usize);

/// Mixing weights over reward bases. Non-negative and summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preference(Vec<f64>);

impl Preference {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("preference needs at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < -1e-12) {
            return Err(Error::config(format!(
                "preference weights must be finite and non-negative: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!(
                "preference weights sum to {sum}, expected 1"
            )));
        }
        Ok(Preference(weights))
    }

    /// Two-basis shorthand: weight `w` on the first basis, `1 - w` on the second.
    pub fn scalar(w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::config(format!("preference w={w} outside [0, 1]")));
        }
        Ok(Preference(vec![w, 1.0 - w]))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sum_k w_k * r_k`.
pub fn combine_rewards(w: &Preference, basis: &[f64]) -> Result<f64> {
    if basis.len() != w.len() {
        return Err(Error::config(format!(
            "preference has {} weights but {} reward bases were given",
            w.len(),
            basis.len()
        )));
    }
    Ok(w.0.iter().zip(basis).map(|(a, b)| a * b).sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub state_dim: usize,
    pub n_actions: usize,
    pub n_bases: usize,
    pub horizon: usize,
    pub gamma: f64,
    /// Box used for discretization and exploring starts.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

pub trait Environment: Send + Sync {
    fn spec(&self) -> &EnvSpec;

    fn initial_state(&self) -> StateVec;

    fn is_terminal(&self, s: &[f64]) -> bool;

    /// Unchecked transition. Callers guarantee `s` is non-terminal and `a` valid.
    fn transition(&self, s: &[f64], a: Action) -> StateVec;

    /// Writes the reward bases for the transition `s --a--> next` into `out`.
    fn reward_bases_into(&self, s: &[f64], a: Action, next: &[f64], out: &mut [f64]);

    /// Writes `d r_k / d next_d` into `out[k * dim + d]`. The default treats
    /// rewards as locally constant in the successor state.
    fn reward_next_grad(&self, _s: &[f64], _a: Action, _next: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
    }

    fn step(&self, s: &[f64], a: Action) -> Result<StateVec> {
        let spec = self.spec();
        if s.len() != spec.state_dim {
            return Err(Error::contract(format!(
                "state has dimension {}, expected {}",
                s.len(),
                spec.state_dim
            )));
        }
        if a.0 >= spec.n_actions {
            return Err(Error::contract(format!(
                "action {} out of range for {} actions",
                a.0, spec.n_actions
            )));
        }
        if self.is_terminal(s) {
            return Err(Error::contract(format!("step called on terminal state {s:?}")));
        }
        Ok(self.transition(s, a))
    }

    fn reward_bases(&self, s: &[f64], a: Action, next: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.spec().n_bases];
        self.reward_bases_into(s, a, next, &mut out);
        out
    }
}

/// A stochastic or deterministic action rule over continuous states.
pub trait Policy: Send + Sync {
    fn action_probs(&self, s: &[f64]) -> Vec<f64>;

    /// True when `act` never consults the random stream.
    fn is_deterministic(&self) -> bool {
        false
    }

    fn act(&self, s: &[f64], rng: &mut ChaCha8Rng) -> Action {
        sample_action(&self.action_probs(s), rng)
    }
}

/// Inverse-CDF draw from `probs`.
pub fn sample_action(probs: &[f64], rng: &mut ChaCha8Rng) -> Action {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Action(i);
        }
    }
    Action(probs.len() - 1)
}

/// Picks actions uniformly at random.
#[derive(Debug, Clone, Copy)]
pub struct UniformPolicy {
    pub n_actions: usize,
}

impl Policy for UniformPolicy {
    fn action_probs(&self, _s: &[f64]) -> Vec<f64> {
        vec![1.0 / self.n_actions as f64; self.n_actions]
    }

    fn act(&self, _s: &[f64], rng: &mut ChaCha8Rng) -> Action {
        Action(rng.random_range(0..self.n_actions))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: StateVec,
    pub action: Action,
    pub next: StateVec,
    pub rewards: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub terminated: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Hit the horizon cap without reaching a terminal state.
    pub fn truncated(&self) -> bool {
        !self.terminated
    }
}

/// Simulates one episode from the initial state and returns it with its
/// discounted return under `w`.
pub fn rollout(
    env: &dyn Environment,
    policy: &dyn Policy,
    w: &Preference,
    seed: u64,
) -> Result<(Trajectory, f64)> {
    let spec = env.spec();
    if w.len() != spec.n_bases {
        return Err(Error::config(format!(
            "preference has {} weights, {} has {} reward bases",
            w.len(),
            spec.name,
            spec.n_bases
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = env.initial_state();
    let mut steps = Vec::new();
    let mut ret = 0.0;
    let mut discount = 1.0;
    let mut terminated = env.is_terminal(&s);
    while !terminated && steps.len() < spec.horizon {
        let a = policy.act(&s, &mut rng);
        let next = env.step(&s, a)?;
        let rewards = env.reward_bases(&s, a, &next);
        ret += discount * combine_rewards(w, &rewards)?;
        discount *= spec.gamma;
        terminated = env.is_terminal(&next);
        steps.push(Step {
            state: std::mem::replace(&mut s, next.clone()),
            action: a,
            next,
            rewards,
        });
    }
    Ok((Trajectory { steps, terminated }, ret))
}

/// Return of one episode without recording the trajectory.
pub fn episode_return(
    env: &dyn Environment,
    policy: &dyn Policy,
    w: &Preference,
    seed: u64,
) -> Result<f64> {
    let spec = env.spec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = env.initial_state();
    let mut buf = vec![0.0; spec.n_bases];
    let mut ret = 0.0;
    let mut discount = 1.0;
    for _ in 0..spec.horizon {
        if env.is_terminal(&s) {
            break;
        }
        let a = policy.act(&s, &mut rng);
        let next = env.step(&s, a)?;
        env.reward_bases_into(&s, a, &next, &mut buf);
        ret += discount * combine_rewards(w, &buf)?;
        discount *= spec.gamma;
        s = next;
    }
    Ok(ret)
}
