//! Model-based reinforcement learning with decision-focused and robust
//! decision-focused model training.
//!
//! A restricted transition model `theta` is planned on for a reward
//! preference `w`; the resulting policy is scored in the true environment.
//! [`objectives`] computes those scores and their gradients in `theta`,
//! [`training`] ascends them, and [`eval`] produces the reported metrics.

pub mod domains;
pub mod envs;
pub mod error;
pub mod eval;
pub mod grid;
pub mod models;
pub mod objectives;
pub mod planning;
pub mod training;

pub use envs::{Action, Environment, Preference, StateVec};
pub use error::{Error, Result};
pub use grid::GridSpec;
pub use models::TransitionModel;
pub use planning::{PolicyMode, QTable};
