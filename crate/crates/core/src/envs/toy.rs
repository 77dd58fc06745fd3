use serde::{Deserialize, Serialize};

use super::{Action, EnvSpec, Environment, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyParams {
    pub theta: [f64; 2],
    pub boundary: f64,
    pub band_width: f64,
    /// Shift of the square wave: band `floor((s1 + phase) / band_width)` is high when even.
    pub phase: f64,
    pub high: f64,
    pub low: f64,
    pub horizon: usize,
}

impl Default for ToyParams {
    fn default() -> Self {
        ToyParams {
            theta: [1.5, 5.0],
            boundary: 25.1,
            band_width: 2.5,
            phase: 3.0,
            high: 5.0,
            low: -1.0,
            horizon: 200,
        }
    }
}

/// Two-dimensional additive chain: action `i` advances coordinate `i` by `theta[i]`.
#[derive(Debug, Clone)]
pub struct ToyEnv {
    pub params: ToyParams,
    spec: EnvSpec,
}

impl ToyEnv {
    pub fn new(params: ToyParams) -> Self {
        let spec = EnvSpec {
            name: "toy".into(),
            state_dim: 2,
            n_actions: 2,
            n_bases: 2,
            horizon: params.horizon,
            gamma: 1.0,
            lower: vec![0.0, 0.0],
            upper: vec![26.0, 26.0],
        };
        ToyEnv { params, spec }
    }

    pub fn action_vector(a: Action) -> [f64; 2] {
        match a.0 {
            0 => [1.0, 0.0],
            _ => [0.0, 1.0],
        }
    }
}

impl Default for ToyEnv {
    fn default() -> Self {
        ToyEnv::new(ToyParams::default())
    }
}

/// `(r1, r0)` at `s`: square wave in `s1`, bowl in `s2`.
pub fn toy_reward_bases(params: &ToyParams, s: &[f64]) -> (f64, f64) {
    let band = ((s[0] + params.phase) / params.band_width).floor() as i64;
    let r1 = if band.rem_euclid(2) == 0 {
        params.high
    } else {
        params.low
    };
    let r0 = if s[1] <= 13.0 {
        200.0 * (s[1] / 13.0).powi(2) - 1.0
    } else {
        -201.0
    };
    (r1, r0)
}

impl Environment for ToyEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn initial_state(&self) -> StateVec {
        vec![0.0, 0.0]
    }

    fn is_terminal(&self, s: &[f64]) -> bool {
        s.iter().any(|&x| x > self.params.boundary)
    }

    fn transition(&self, s: &[f64], a: Action) -> StateVec {
        let dir = Self::action_vector(a);
        vec![
            s[0] + self.params.theta[0] * dir[0],
            s[1] + self.params.theta[1] * dir[1],
        ]
    }

    fn reward_bases_into(&self, s: &[f64], _a: Action, next: &[f64], out: &mut [f64]) {
        // The step that leaves the box pays nothing.
        if self.is_terminal(next) {
            out[0] = 0.0;
            out[1] = 0.0;
            return;
        }
        let (r1, r0) = toy_reward_bases(&self.params, s);
        out[0] = r1;
        out[1] = r0;
    }
}
