use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::EvalMdp;
use crate::envs::{episode_return, Environment, Policy, Preference, StateVec};
use crate::error::{check_finite, Error, Result};
use crate::grid::GridSpec;
use crate::models::TransitionModel;
use crate::planning::{
    discretize, fitted_q_iteration, soft_value_iteration_from, value_iteration_from, DiscreteMdp,
    DiscreteModel, Features, FqiPolicy, GridPolicy, Lookup, PolicyMode, QTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlannerKind {
    ValueIteration,
    /// Fitted Q iteration over the planning-grid nodes as sample states.
    FittedQ {
        #[serde(default)]
        poly2: bool,
        #[serde(default)]
        ridge: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub tol: f64,
    pub max_iters: usize,
    /// Overrides the environment discount when planning on the model.
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            kind: PlannerKind::ValueIteration,
            tol: 1e-9,
            max_iters: 20_000,
            gamma: None,
        }
    }
}

/// How an objective scores a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    /// Hard planning, greedy policy, rollouts in the true environment.
    Greedy,
    /// Soft planning at `tau`, Boltzmann policy scored exactly on the evaluation chain.
    Soft(f64),
}

/// Model class with a subset of its parameters exposed for training.
#[derive(Debug, Clone)]
pub struct ModelFamily {
    pub template: TransitionModel,
    pub trainable: Vec<usize>,
}

impl ModelFamily {
    pub fn all(template: TransitionModel) -> Self {
        let trainable = (0..template.n_params()).collect();
        ModelFamily { template, trainable }
    }

    pub fn theta(&self, model: &TransitionModel) -> Vec<f64> {
        let p = model.params();
        self.trainable.iter().map(|&i| p[i]).collect()
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        self.theta(&self.template)
    }

    pub fn model(&self, theta: &[f64]) -> Result<TransitionModel> {
        if theta.len() != self.trainable.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.trainable.len(),
                theta.len()
            )));
        }
        check_finite(theta, "model parameters")?;
        let mut p = self.template.params();
        for (&i, &v) in self.trainable.iter().zip(theta) {
            p[i] = v;
        }
        let mut m = self.template.clone();
        m.set_params(&p)?;
        Ok(m)
    }

    /// Maps `theta` back into the class constraints.
    pub fn project(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let mut m = self.model(theta)?;
        m.project();
        Ok(self.theta(&m))
    }
}

/// Everything needed to turn model parameters into a true-environment score.
#[derive(Clone)]
pub struct Pipeline {
    pub env: Arc<dyn Environment>,
    pub family: ModelFamily,
    pub grid: GridSpec,
    pub lookup: Lookup,
    pub planner: PlannerConfig,
    pub eval_mdp: Option<Arc<EvalMdp>>,
}

/// Planner output for one preference.
pub enum Plan {
    Table(QTable),
    Fitted(FqiPolicy),
}

impl Pipeline {
    pub fn discretize(&self, theta: &[f64], with_grad: bool) -> Result<DiscreteModel> {
        let model = self.family.model(theta)?;
        let trainable = with_grad.then_some(self.family.trainable.as_slice());
        let mut dm = discretize(&model, self.env.as_ref(), &self.grid, trainable)?;
        if let Some(g) = self.planner.gamma {
            dm.gamma = g;
        }
        Ok(dm)
    }

    fn eval_mdp(&self) -> Result<&EvalMdp> {
        self.eval_mdp
            .as_deref()
            .ok_or_else(|| Error::config("soft evaluation needs an evaluation chain"))
    }

    /// Soft Q table on the model, warm-started from `init`.
    pub fn soft_plan(&self, mdp: &DiscreteMdp, tau: f64, init: Option<&QTable>) -> Result<QTable> {
        let q = soft_value_iteration_from(
            mdp,
            tau,
            self.planner.tol,
            self.planner.max_iters,
            init.map(|q| q.values.as_slice()),
        )?;
        check_finite(&q.values, "soft Q table")?;
        if !q.converged {
            log::warn!("soft value iteration stopped at residual {:e}", q.residual);
        }
        Ok(q)
    }

    pub fn hard_plan(&self, dm: &DiscreteModel, theta: &[f64], w: &Preference) -> Result<Plan> {
        match &self.planner.kind {
            PlannerKind::ValueIteration => {
                let mdp = dm.mdp(w)?;
                let q = value_iteration_from(&mdp, self.planner.tol, self.planner.max_iters, None);
                check_finite(&q.values, "Q table")?;
                if !q.converged {
                    log::warn!("value iteration stopped at residual {:e}", q.residual);
                }
                Ok(Plan::Table(q))
            }
            PlannerKind::FittedQ { poly2, ridge } => {
                let model = self.family.model(theta)?;
                let features = if *poly2 {
                    Features::Poly2 { dim: self.grid.dim() }
                } else {
                    Features::Grid(self.grid.clone())
                };
                let samples: Vec<StateVec> = (0..self.grid.len()).map(|i| self.grid.node_state(i)).collect();
                let weights = fitted_q_iteration(
                    &model,
                    self.env.as_ref(),
                    w,
                    &features,
                    self.env.spec().horizon,
                    &samples,
                    *ridge,
                )?;
                Ok(Plan::Fitted(FqiPolicy { weights, mode: PolicyMode::Greedy }))
            }
        }
    }

    pub fn greedy_policy(&self, q: QTable) -> GridPolicy {
        GridPolicy {
            grid: self.grid.clone(),
            lookup: self.lookup,
            q,
            mode: PolicyMode::Greedy,
        }
    }

    /// Return of `policy` in the true environment.
    pub fn true_return(&self, policy: &dyn Policy, w: &Preference, seed: u64) -> Result<f64> {
        let r = episode_return(self.env.as_ref(), policy, w, seed)?;
        if !r.is_finite() {
            return Err(Error::NonFinite { context: "episode return".into(), index: 0 });
        }
        Ok(r)
    }

    pub fn plan_return(&self, plan: Plan, w: &Preference, seed: u64) -> Result<f64> {
        match plan {
            Plan::Table(q) => self.true_return(&self.greedy_policy(q), w, seed),
            Plan::Fitted(p) => self.true_return(&p, w, seed),
        }
    }

    /// Score of `theta` at one preference.
    pub fn evaluate(&self, theta: &[f64], w: f64, mode: EvalMode) -> Result<f64> {
        let pref = Preference::scalar(w)?;
        let dm = self.discretize(theta, false)?;
        self.evaluate_discretized(&dm, theta, &pref, mode, None).map(|(j, _)| j)
    }

    pub(crate) fn evaluate_discretized(
        &self,
        dm: &DiscreteModel,
        theta: &[f64],
        pref: &Preference,
        mode: EvalMode,
        warm: Option<&QTable>,
    ) -> Result<(f64, Option<QTable>)> {
        match mode {
            EvalMode::Greedy => {
                let plan = self.hard_plan(dm, theta, pref)?;
                Ok((self.plan_return(plan, pref, 0)?, None))
            }
            EvalMode::Soft(tau) => {
                let mdp = dm.mdp(pref)?;
                let q = self.soft_plan(&mdp, tau, warm)?;
                let j = self.eval_mdp()?.soft_return(&q, pref, tau);
                Ok((j, Some(q)))
            }
        }
    }

    /// Soft score of `theta` and its gradient, through the planner's fixed point.
    pub(crate) fn soft_value_and_grad(
        &self,
        dm: &DiscreteModel,
        pref: &Preference,
        tau: f64,
        warm: Option<&QTable>,
    ) -> Result<(f64, Vec<f64>, QTable)> {
        let mdp = dm.mdp(pref)?;
        let q = self.soft_plan(&mdp, tau, warm)?;
        let (j, gq) = self.eval_mdp()?.soft_return_grad(&q, pref, tau);
        let nu = crate::planning::soft_vi_adjoint(&mdp, &q, tau, &gq, self.planner.tol, self.planner.max_iters)?;
        let mut v = q.state_values(Some(tau));
        for (s, x) in v.iter_mut().enumerate() {
            if mdp.transitions.terminal[s] {
                *x = 0.0;
            }
        }
        let grad = dm.gradient(&mdp, pref, &v, &nu)?;
        check_finite(&grad, "model gradient")?;
        Ok((j, grad, q))
    }
}
