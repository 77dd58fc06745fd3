//! Planners for finite and gridded MDPs: hard and soft value iteration,
//! fitted Q iteration, and policy extraction.

mod discretize;
mod fqi;
mod mdp;
mod policy;
mod vi;

pub use discretize::{discretize, discretize_mdp, discretize_true, DiscreteModel, ModelGrad};
pub use fqi::{fitted_q_iteration, Features, FqiWeights};
pub use mdp::{DiscreteMdp, Transitions};
pub use policy::{
    action_distribution, extract_policy, greedy_action, FqiPolicy, GridPolicy, Lookup, PolicyMode,
    TabularPolicy,
};
pub use vi::{
    soft_value_iteration, soft_value_iteration_from, soft_vi_adjoint, softmax_row, value_iteration,
    value_iteration_from, QTable,
};
