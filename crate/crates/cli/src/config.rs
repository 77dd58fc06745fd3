//! Experiment configuration: one JSON document, validated before any compute.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rdfrl_core::domains::DomainConfig;
use rdfrl_core::objectives::{GradientBackend, GridWeighting, PlannerConfig, PreferenceDist};
use rdfrl_core::training::{Init, ObjectiveKind, TrainConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mle,
    Df,
    Rdf,
    /// Planning on the true dynamics over the same grid.
    True,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Mle => "MLE",
            Method::Df => "DF",
            Method::Rdf => "RDF",
            Method::True => "True",
        }
    }
}

/// Gradient-ascent settings shared by every trained method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSettings {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub max_halvings: usize,
    pub tau: f64,
    pub backend: GradientBackend,
    pub init: Init,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSettings {
            step_size: t.step_size,
            max_iters: t.max_iters,
            grad_tol: t.grad_tol,
            max_halvings: t.max_halvings,
            tau: t.tau,
            backend: t.backend,
            init: t.init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalGrid {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "EvalGrid::default_n")]
    pub n: usize,
}

impl EvalGrid {
    fn default_n() -> usize {
        11
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

/// Inputs used only by `sweep`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub lambdas: Vec<f64>,
    pub grid_sizes: Vec<usize>,
    /// Values of a one-dimensional model parameter.
    pub thetas: Option<ThetaRange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment_id: String,
    pub env: DomainConfig,
    #[serde(default = "ExperimentConfig::default_methods")]
    pub methods: Vec<Method>,
    pub w_train: f64,
    pub preference: PreferenceDist,
    #[serde(default = "ExperimentConfig::default_grid_size")]
    pub grid_size: usize,
    #[serde(default)]
    pub weighting: GridWeighting,
    /// One RDF run per value.
    #[serde(default = "ExperimentConfig::default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Defaults to the domain's own planner settings.
    #[serde(default)]
    pub planner: Option<PlannerConfig>,
    #[serde(default)]
    pub training: TrainingSettings,
    #[serde(default = "ExperimentConfig::default_seeds")]
    pub seeds: Vec<u64>,
    /// Defaults to 11 points spanning the preference support.
    #[serde(default)]
    pub eval: Option<EvalGrid>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub sweep: SweepSettings,
}

impl ExperimentConfig {
    fn default_methods() -> Vec<Method> {
        vec![Method::Mle, Method::Df, Method::Rdf, Method::True]
    }
    fn default_grid_size() -> usize {
        5
    }
    fn default_lambdas() -> Vec<f64> {
        vec![0.0]
    }
    fn default_seeds() -> Vec<u64> {
        vec![0]
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        if text.trim().is_empty() {
            return Err(CliError::Config("config file is empty".into()));
        }
        let cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, msg: String| Err(CliError::Config(format!("field `{field}`: {msg}")));
        if self.experiment_id.is_empty()
            || !self.experiment_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return bad("experiment_id", "must be non-empty ASCII letters, digits, '_' or '-'".into());
        }
        if !(0.0..=1.0).contains(&self.w_train) {
            return bad("w_train", format!("{} outside [0, 1]", self.w_train));
        }
        if self.methods.is_empty() {
            return bad("methods", "at least one method is required".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds", "at least one seed is required".into());
        }
        if self.lambdas.is_empty() && self.methods.contains(&Method::Rdf) {
            return bad("lambdas", "RDF needs at least one lambda".into());
        }
        if self.grid_size < 2 {
            return bad("grid_size", format!("{} is below 2", self.grid_size));
        }
        if let Err(e) = self.preference.validate() {
            return bad("preference", e.to_string());
        }
        for &l in &self.lambdas {
            if let Err(e) = self.train_config(ObjectiveKind::Rdf, l, 0).validate() {
                return bad("lambdas", e.to_string());
            }
        }
        if let Err(e) = self.train_config(ObjectiveKind::Df, 0.0, 0).validate() {
            return bad("training", e.to_string());
        }
        let grid = self.eval_grid();
        if grid.n == 0 || !(0.0..=1.0).contains(&grid.lo) || !(0.0..=1.0).contains(&grid.hi) || grid.lo > grid.hi {
            return bad("eval", format!("need 0 <= lo <= hi <= 1 and n >= 1, got {grid:?}"));
        }
        if let Some(&s) = self.sweep.grid_sizes.iter().find(|&&s| s < 2) {
            return bad("sweep.grid_sizes", format!("{s} is below 2"));
        }
        if let Some(t) = &self.sweep.thetas {
            if t.n < 2 || !(t.lo < t.hi) {
                return bad("sweep.thetas", "need n >= 2 and lo < hi".into());
            }
        }
        Ok(())
    }

    pub fn planner(&self) -> PlannerConfig {
        self.planner.clone().unwrap_or_else(|| self.env.default_planner())
    }

    pub fn eval_grid(&self) -> EvalGrid {
        self.eval.clone().unwrap_or_else(|| {
            let lo = self.preference.support.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
            let hi = self.preference.support.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
            EvalGrid { lo, hi, n: EvalGrid::default_n() }
        })
    }

    pub fn train_config(&self, kind: ObjectiveKind, lambda: f64, seed: u64) -> TrainConfig {
        let t = &self.training;
        TrainConfig {
            kind,
            lambda,
            w_train: self.w_train,
            dist: Some(self.preference.clone()),
            grid_size: self.grid_size,
            weighting: self.weighting,
            step_size: t.step_size,
            max_iters: t.max_iters,
            grad_tol: t.grad_tol,
            max_halvings: t.max_halvings,
            tau: t.tau,
            backend: t.backend,
            init: t.init.clone(),
            seed,
        }
    }

    /// The domain for one seed: the data seed is offset by the run seed.
    pub fn env_for_seed(&self, seed: u64) -> DomainConfig {
        let mut env = self.env.clone();
        match &mut env {
            DomainConfig::Toy(c) => c.data_seed = c.data_seed.wrapping_add(seed),
            DomainConfig::MountainCar(c) => c.data_seed = c.data_seed.wrapping_add(seed),
            DomainConfig::Cancer(c) => c.data_seed = c.data_seed.wrapping_add(seed),
        }
        env
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(&self.experiment_id))
    }
}
