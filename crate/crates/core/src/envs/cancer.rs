use serde::{Deserialize, Serialize};

use super::{Action, EnvSpec, Environment, StateVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CancerParams {
    /// Drug carry-over per step.
    pub rho: f64,
    pub growth: f64,
    pub kill: f64,
    pub dose: f64,
    pub steps: usize,
    pub mtd0: f64,
}

impl Default for CancerParams {
    fn default() -> Self {
        CancerParams {
            rho: 0.5,
            growth: 0.02,
            kill: 0.08,
            dose: 1.0,
            steps: 30,
            mtd0: 1.0,
        }
    }
}

/// Tumor/drug surrogate with state `(mtd, mtd_prev, concentration, t / T, mtd0)`.
/// Actions: 0 no dose, 1 dose.
#[derive(Debug, Clone)]
pub struct CancerEnv {
    pub params: CancerParams,
    spec: EnvSpec,
}

pub const MTD: usize = 0;
pub const MTD_PREV: usize = 1;
pub const CONC: usize = 2;
pub const TIME: usize = 3;
pub const MTD0: usize = 4;

impl CancerEnv {
    pub fn new(params: CancerParams) -> Self {
        let max_conc = params.dose / (1.0 - params.rho).max(1e-6);
        let max_mtd = params.mtd0 * (1.0 + params.growth).powi(params.steps as i32);
        let spec = EnvSpec {
            name: "cancer".into(),
            state_dim: 5,
            n_actions: 2,
            n_bases: 2,
            horizon: params.steps,
            gamma: 1.0,
            lower: vec![0.0, 0.0, 0.0, 0.0, params.mtd0],
            upper: vec![max_mtd, max_mtd, max_conc, 1.0, params.mtd0],
        };
        CancerEnv { params, spec }
    }

    pub fn step_index(&self, s: &[f64]) -> usize {
        (s[TIME] * self.params.steps as f64).round() as usize
    }
}

impl Default for CancerEnv {
    fn default() -> Self {
        CancerEnv::new(CancerParams::default())
    }
}

/// `(r1, r0)`: tumor shrinkage (with a terminal bonus) and drug exposure.
pub fn cancer_reward_bases(
    mtd: f64,
    mtd_next: f64,
    mtd0: f64,
    mtd_final: f64,
    concentration: f64,
    last_step: bool,
) -> (f64, f64) {
    let mut r1 = (mtd - mtd_next) / 10.0;
    if last_step {
        r1 += mtd0 - mtd_final;
    }
    (r1, -concentration)
}

impl Environment for CancerEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn initial_state(&self) -> StateVec {
        let m = self.params.mtd0;
        vec![m, m, 0.0, 0.0, m]
    }

    fn is_terminal(&self, s: &[f64]) -> bool {
        self.step_index(s) >= self.params.steps
    }

    fn transition(&self, s: &[f64], a: Action) -> StateVec {
        let p = &self.params;
        let conc = p.rho * s[CONC] + if a.0 == 1 { p.dose } else { 0.0 };
        let mtd = (s[MTD] * (1.0 + p.growth) - p.kill * conc * s[MTD]).max(0.0);
        let t = (self.step_index(s) + 1) as f64 / p.steps as f64;
        vec![mtd, s[MTD], conc, t, s[MTD0]]
    }

    fn reward_bases_into(&self, s: &[f64], _a: Action, next: &[f64], out: &mut [f64]) {
        let last = self.is_terminal(next);
        let (r1, r0) = cancer_reward_bases(s[MTD], next[MTD], s[MTD0], next[MTD], next[CONC], last);
        out[0] = r1;
        out[1] = r0;
    }

    fn reward_next_grad(&self, _s: &[f64], _a: Action, next: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let dim = self.spec.state_dim;
        let last = if self.is_terminal(next) { 1.0 } else { 0.0 };
        out[MTD] = -0.1 - last;
        out[dim + CONC] = -1.0;
    }
}
