//! Restricted transition-model classes and their maximum-likelihood fits.

mod data;
mod linear;
mod serialize;
mod shared_scalar;
mod tabular;

pub use data::{collect_balanced, collect_transitions, StartMode, Transition, TransitionDataset};
pub use serialize::{model_from_map, parse_kv};
pub use linear::{mle_linear, LinearFit, LinearModel};
pub use shared_scalar::{mle_shared_scalar, SharedScalarModel};
pub use tabular::{mle_tabular, smoothed_frequencies, TabularModel};

use crate::envs::{Action, StateVec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionModel {
    SharedScalar(SharedScalarModel),
    Linear(LinearModel),
    Tabular(TabularModel),
}

/// Successor distribution predicted by a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Point(StateVec),
    /// `(grid node, probability)` pairs of a tabular model.
    Cells(Vec<(usize, f64)>),
}

impl TransitionModel {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionModel::SharedScalar(_) => "shared_scalar",
            TransitionModel::Linear(_) => "linear",
            TransitionModel::Tabular(_) => "tabular",
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            TransitionModel::SharedScalar(m) => m.state_dim(),
            TransitionModel::Linear(m) => m.state_dim(),
            TransitionModel::Tabular(m) => m.grid().dim(),
        }
    }

    pub fn n_actions(&self) -> usize {
        match self {
            TransitionModel::SharedScalar(m) => m.action_vectors.len(),
            TransitionModel::Linear(m) => m.n_actions(),
            TransitionModel::Tabular(m) => m.n_actions(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self {
            TransitionModel::SharedScalar(m) => vec![m.c],
            TransitionModel::Linear(m) => m.params(),
            TransitionModel::Tabular(m) => m.logits().to_vec(),
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            TransitionModel::SharedScalar(_) => 1,
            TransitionModel::Linear(m) => m.n_params(),
            TransitionModel::Tabular(m) => m.logits().len(),
        }
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::contract(format!(
                "{} model takes {} parameters, got {}",
                self.name(),
                self.n_params(),
                p.len()
            )));
        }
        match self {
            TransitionModel::SharedScalar(m) => m.c = p[0],
            TransitionModel::Linear(m) => m.set_params(p),
            TransitionModel::Tabular(m) => m.set_logits(p),
        }
        Ok(())
    }

    /// Keeps parameters inside the class constraints.
    pub fn project(&mut self) {
        if let TransitionModel::SharedScalar(m) = self {
            m.c = m.c.max(SharedScalarModel::MIN_C);
        }
    }
}

/// Successor distribution at `(s, a)`. The flag reports a state clamped onto a tabular grid.
pub fn model_predict(model: &TransitionModel, s: &[f64], a: Action) -> Result<(Prediction, bool)> {
    if s.len() != model.state_dim() {
        return Err(Error::contract(format!(
            "state has dimension {}, model expects {}",
            s.len(),
            model.state_dim()
        )));
    }
    if a.0 >= model.n_actions() {
        return Err(Error::contract(format!("action {} out of range", a.0)));
    }
    Ok(match model {
        TransitionModel::SharedScalar(m) => (Prediction::Point(m.predict(s, a)), false),
        TransitionModel::Linear(m) => (Prediction::Point(m.predict(s, a)), false),
        TransitionModel::Tabular(m) => {
            let (cell, clamped) = m.grid().nearest(s);
            (Prediction::Cells(m.distribution(cell, a)), clamped)
        }
    })
}
