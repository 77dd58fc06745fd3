//! Config-driven experiment runner: training, evaluation, CSV/SVG artifacts.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod plot;
pub mod run;
pub mod sweep;

pub use config::{ExperimentConfig, Method};
pub use error::{CliError, CliResult};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "RDFRL_WORKERS";

/// Sizes the global rayon pool from [`WORKERS_ENV`] when set.
pub fn init_workers() -> CliResult<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{WORKERS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size worker pool: {e}")))
}
