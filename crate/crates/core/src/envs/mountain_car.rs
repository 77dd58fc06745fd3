use serde::{Deserialize, Serialize};

use super::{Action, EnvSpec, Environment, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MountainCarParams {
    pub force: f64,
    pub gravity: f64,
    pub min_position: f64,
    pub max_position: f64,
    pub max_speed: f64,
    pub goal: f64,
    pub start_position: f64,
    pub accel_penalty: f64,
    pub horizon: usize,
}

impl Default for MountainCarParams {
    fn default() -> Self {
        MountainCarParams {
            force: 0.001,
            gravity: 0.0025,
            min_position: -1.2,
            max_position: 0.6,
            max_speed: 0.07,
            goal: 0.5,
            start_position: -std::f64::consts::FRAC_PI_6,
            accel_penalty: 0.1,
            horizon: 500,
        }
    }
}

/// Classic under-powered car. Actions: 0 backward, 1 zero throttle, 2 forward.
#[derive(Debug, Clone)]
pub struct MountainCarEnv {
    pub params: MountainCarParams,
    spec: EnvSpec,
}

impl MountainCarEnv {
    pub fn new(params: MountainCarParams) -> Self {
        let spec = EnvSpec {
            name: "mountain_car".into(),
            state_dim: 2,
            n_actions: 3,
            n_bases: 2,
            horizon: params.horizon,
            gamma: 1.0,
            lower: vec![params.min_position, -params.max_speed],
            upper: vec![params.goal, params.max_speed],
        };
        MountainCarEnv { params, spec }
    }
}

impl Default for MountainCarEnv {
    fn default() -> Self {
        MountainCarEnv::new(MountainCarParams::default())
    }
}

/// `(r1, r0)`: time penalty and throttle penalty.
pub fn mountain_car_reward_bases(params: &MountainCarParams, a: Action, terminal: bool) -> (f64, f64) {
    if terminal {
        return (0.0, 0.0);
    }
    let r0 = if a.0 == 1 { 0.0 } else { -params.accel_penalty };
    (-1.0, r0)
}

impl Environment for MountainCarEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn initial_state(&self) -> StateVec {
        vec![self.params.start_position, 0.0]
    }

    fn is_terminal(&self, s: &[f64]) -> bool {
        s[0] >= self.params.goal
    }

    fn transition(&self, s: &[f64], a: Action) -> StateVec {
        let p = &self.params;
        let throttle = a.0 as f64 - 1.0;
        let mut v = s[1] + throttle * p.force - (3.0 * s[0]).cos() * p.gravity;
        v = v.clamp(-p.max_speed, p.max_speed);
        let mut x = (s[0] + v).clamp(p.min_position, p.max_position);
        if x <= p.min_position && v < 0.0 {
            v = 0.0;
            x = p.min_position;
        }
        vec![x, v]
    }

    fn reward_bases_into(&self, s: &[f64], a: Action, _next: &[f64], out: &mut [f64]) {
        let (r1, r0) = mountain_car_reward_bases(&self.params, a, self.is_terminal(s));
        out[0] = r1;
        out[1] = r0;
    }
}
