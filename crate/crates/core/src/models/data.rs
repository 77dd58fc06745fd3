use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{Action, Environment, Policy, StateVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: StateVec,
    pub a: Action,
    pub next: StateVec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionDataset {
    pub records: Vec<Transition>,
    pub seed: u64,
    pub policy: String,
}

impl TransitionDataset {
    pub fn action_counts(&self, n_actions: usize) -> Vec<usize> {
        let mut counts = vec![0; n_actions];
        for t in &self.records {
            counts[t.a.0] += 1;
        }
        counts
    }
}

/// Where each collected transition starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StartMode {
    /// Episodes from the initial state, restarted at termination or the horizon.
    #[default]
    Episodic,
    /// Every transition from an independent uniform draw over the box,
    /// rejecting terminal states.
    Uniform,
}

fn uniform_state(env: &dyn Environment, rng: &mut ChaCha8Rng) -> StateVec {
    let spec = env.spec();
    loop {
        let s: StateVec = spec
            .lower
            .iter()
            .zip(&spec.upper)
            .map(|(&lo, &hi)| if hi > lo { rng.random_range(lo..hi) } else { lo })
            .collect();
        if !env.is_terminal(&s) {
            return s;
        }
    }
}

fn collect_with(
    env: &dyn Environment,
    n: usize,
    seed: u64,
    start: StartMode,
    label: String,
    mut choose: impl FnMut(&[f64], &mut ChaCha8Rng) -> Action,
) -> Result<TransitionDataset> {
    if n == 0 {
        return Err(Error::config("requested zero transitions"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = env.spec().horizon;
    let mut records = Vec::with_capacity(n);
    let mut s = match start {
        StartMode::Episodic => env.initial_state(),
        StartMode::Uniform => uniform_state(env, &mut rng),
    };
    let mut t = 0;
    while records.len() < n {
        let a = choose(&s, &mut rng);
        let next = env.step(&s, a)?;
        records.push(Transition { s: s.clone(), a, next: next.clone() });
        t += 1;
        s = match start {
            StartMode::Uniform => uniform_state(env, &mut rng),
            StartMode::Episodic if env.is_terminal(&next) || t >= horizon => {
                t = 0;
                env.initial_state()
            }
            StartMode::Episodic => next,
        };
    }
    Ok(TransitionDataset { records, seed, policy: label })
}

/// `n` transitions under `policy`, reproducible from `seed`.
pub fn collect_transitions(
    env: &dyn Environment,
    policy: &dyn Policy,
    n: usize,
    seed: u64,
    start: StartMode,
) -> Result<TransitionDataset> {
    collect_with(env, n, seed, start, "policy".into(), |s, rng| policy.act(s, rng))
}

/// Like uniform-random collection, but the action sequence is a shuffled
/// multiset with equal counts per action (up to one when `n` does not divide).
pub fn collect_balanced(
    env: &dyn Environment,
    n: usize,
    seed: u64,
    start: StartMode,
) -> Result<TransitionDataset> {
    let k = env.spec().n_actions;
    let mut actions: Vec<Action> = (0..n).map(|i| Action(i % k)).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    actions.shuffle(&mut shuffle_rng);
    let mut iter = actions.into_iter();
    collect_with(env, n, seed, start, "balanced".into(), move |_, _| {
        iter.next().expect("action sequence sized to n")
    })
}
