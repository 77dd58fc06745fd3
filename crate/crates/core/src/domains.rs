//! Ready-made experiment domains: environment, fitted model family,
//! planning grid and evaluation chain.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::cancer::{CancerEnv, CancerParams, CONC, MTD};
use crate::envs::mountain_car::{MountainCarEnv, MountainCarParams};
use crate::envs::toy::{ToyEnv, ToyParams};
use crate::envs::{Action, Environment, UniformPolicy};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::models::{collect_balanced, collect_transitions, StartMode, TransitionDataset};
use crate::models::mle_linear;
use crate::models::mle_shared_scalar;
use crate::models::{mle_tabular, TransitionModel};
use crate::objectives::{EvalMdp, ModelFamily, Pipeline, PlannerConfig};
use crate::planning::Lookup;

fn default_n_data() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyDomain {
    #[serde(default)]
    pub params: ToyParams,
    #[serde(default = "ToyDomain::default_resolution")]
    pub resolution: f64,
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    #[serde(default)]
    pub data_seed: u64,
    /// Collect with an exactly balanced action multiset instead of i.i.d. draws.
    #[serde(default = "ToyDomain::default_balanced")]
    pub balanced: bool,
}

impl ToyDomain {
    fn default_resolution() -> f64 {
        0.25
    }
    fn default_balanced() -> bool {
        true
    }
}

impl Default for ToyDomain {
    fn default() -> Self {
        ToyDomain {
            params: ToyParams::default(),
            resolution: 0.25,
            n_data: 10_000,
            data_seed: 0,
            balanced: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountainCarDomain {
    #[serde(default)]
    pub params: MountainCarParams,
    #[serde(default = "MountainCarDomain::default_cells")]
    pub cells: usize,
    #[serde(default = "MountainCarDomain::default_radius")]
    pub radius: usize,
    #[serde(default = "MountainCarDomain::default_alpha")]
    pub alpha: f64,
    /// Nodes per dimension of the chain used for soft evaluation.
    #[serde(default = "MountainCarDomain::default_eval_cells")]
    pub eval_cells: usize,
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    #[serde(default)]
    pub data_seed: u64,
}

impl MountainCarDomain {
    fn default_cells() -> usize {
        15
    }
    fn default_radius() -> usize {
        2
    }
    fn default_alpha() -> f64 {
        0.1
    }
    fn default_eval_cells() -> usize {
        61
    }
}

impl Default for MountainCarDomain {
    fn default() -> Self {
        MountainCarDomain {
            params: MountainCarParams::default(),
            cells: 15,
            radius: 2,
            alpha: 0.1,
            eval_cells: 61,
            n_data: 10_000,
            data_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CancerDomain {
    #[serde(default)]
    pub params: CancerParams,
    /// Planning-grid nodes for `(mtd, mtd_prev, concentration, time)`.
    #[serde(default = "CancerDomain::default_nodes")]
    pub nodes: [usize; 4],
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    #[serde(default)]
    pub data_seed: u64,
    #[serde(default)]
    pub ridge: f64,
}

impl CancerDomain {
    fn default_nodes() -> [usize; 4] {
        [21, 21, 11, 31]
    }
}

impl Default for CancerDomain {
    fn default() -> Self {
        CancerDomain {
            params: CancerParams::default(),
            nodes: Self::default_nodes(),
            n_data: 10_000,
            data_seed: 0,
            ridge: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DomainConfig {
    Toy(ToyDomain),
    MountainCar(MountainCarDomain),
    Cancer(CancerDomain),
}

impl DomainConfig {
    pub fn name(&self) -> &'static str {
        match self {
            DomainConfig::Toy(_) => "toy",
            DomainConfig::MountainCar(_) => "mountain_car",
            DomainConfig::Cancer(_) => "cancer",
        }
    }

    /// Planner settings each domain is meant to run with.
    pub fn default_planner(&self) -> PlannerConfig {
        match self {
            DomainConfig::MountainCar(_) => PlannerConfig { gamma: Some(0.99), ..PlannerConfig::default() },
            _ => PlannerConfig::default(),
        }
    }
}

/// A domain ready for training: the pipeline's template is the MLE fit.
pub struct Domain {
    pub config: DomainConfig,
    pub pipeline: Pipeline,
    pub dataset: TransitionDataset,
    pub mle: TransitionModel,
    /// The least-squares design was rank deficient (minimum-norm fit used).
    pub rank_deficient: bool,
}

impl Domain {
    pub fn build(config: &DomainConfig, planner: PlannerConfig) -> Result<Self> {
        match config {
            DomainConfig::Toy(c) => build_toy(config, c, planner),
            DomainConfig::MountainCar(c) => build_mountain_car(config, c, planner),
            DomainConfig::Cancer(c) => build_cancer(config, c, planner),
        }
    }

    pub fn mle_theta(&self) -> Vec<f64> {
        self.pipeline.family.initial_theta()
    }
}

fn build_toy(config: &DomainConfig, c: &ToyDomain, planner: PlannerConfig) -> Result<Domain> {
    let env = ToyEnv::new(c.params.clone());
    let spec = env.spec().clone();
    let grid = GridSpec::uniform(2, spec.lower[0], spec.upper[0], c.resolution)?;
    let dataset = if c.balanced {
        collect_balanced(&env, c.n_data, c.data_seed, StartMode::Episodic)?
    } else {
        let policy = UniformPolicy { n_actions: spec.n_actions };
        collect_transitions(&env, &policy, c.n_data, c.data_seed, StartMode::Episodic)?
    };
    let vectors: Vec<Vec<f64>> = (0..spec.n_actions).map(|a| ToyEnv::action_vector(Action(a)).to_vec()).collect();
    let mle = TransitionModel::SharedScalar(mle_shared_scalar(&dataset, &vectors)?);
    let lookup = Lookup::Multilinear;
    let eval = EvalMdp::enumerate(&env, &grid, lookup, 100_000)?;
    let pipeline = Pipeline {
        env: Arc::new(env),
        family: ModelFamily::all(mle.clone()),
        grid,
        lookup,
        planner,
        eval_mdp: Some(Arc::new(eval)),
    };
    Ok(Domain { config: config.clone(), pipeline, dataset, mle, rank_deficient: false })
}

fn build_mountain_car(config: &DomainConfig, c: &MountainCarDomain, planner: PlannerConfig) -> Result<Domain> {
    if c.cells < 2 || c.eval_cells < 2 {
        return Err(Error::config("mountain car grids need at least 2 cells per dimension"));
    }
    let env = MountainCarEnv::new(c.params.clone());
    let spec = env.spec().clone();
    let grid = GridSpec::new(spec.lower.clone(), spec.upper.clone(), vec![c.cells; 2])?;
    let eval_grid = GridSpec::new(spec.lower.clone(), spec.upper.clone(), vec![c.eval_cells; 2])?;
    let policy = UniformPolicy { n_actions: spec.n_actions };
    let dataset = collect_transitions(&env, &policy, c.n_data, c.data_seed, StartMode::Uniform)?;
    let model = mle_tabular(&dataset, grid.clone(), spec.n_actions, vec![c.radius; 2], c.alpha)?;
    let mle = TransitionModel::Tabular(model);
    let lookup = Lookup::Nearest;
    let eval = EvalMdp::gridded(&env, &eval_grid, &grid, lookup)?;
    let pipeline = Pipeline {
        env: Arc::new(env),
        family: ModelFamily::all(mle.clone()),
        grid,
        lookup,
        planner,
        eval_mdp: Some(Arc::new(eval)),
    };
    Ok(Domain { config: config.clone(), pipeline, dataset, mle, rank_deficient: false })
}

fn build_cancer(config: &DomainConfig, c: &CancerDomain, planner: PlannerConfig) -> Result<Domain> {
    let env = CancerEnv::new(c.params.clone());
    let spec = env.spec().clone();
    let mut nodes = c.nodes.to_vec();
    nodes.push(1);
    let grid = GridSpec::new(spec.lower.clone(), spec.upper.clone(), nodes)?;
    let policy = UniformPolicy { n_actions: spec.n_actions };
    let dataset = collect_transitions(&env, &policy, c.n_data, c.data_seed, StartMode::Episodic)?;
    let fit = mle_linear(&dataset, spec.n_actions, c.ridge)?;
    if fit.rank_deficient {
        log::warn!("cancer design matrix is rank deficient; using the minimum-norm fit");
    }
    let mut trainable = fit.model.row_params(MTD);
    trainable.extend(fit.model.row_params(CONC));
    let mle = TransitionModel::Linear(fit.model);
    let lookup = Lookup::Multilinear;
    let eval = EvalMdp::gridded(&env, &grid, &grid, lookup)?;
    let pipeline = Pipeline {
        env: Arc::new(env),
        family: ModelFamily { template: mle.clone(), trainable },
        grid,
        lookup,
        planner,
        eval_mdp: Some(Arc::new(eval)),
    };
    Ok(Domain { config: config.clone(), pipeline, dataset, mle, rank_deficient: fit.rank_deficient })
}
