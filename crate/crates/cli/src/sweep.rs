//! `sweep`: lambda, grid-size, non-identifiability and delta-lambda studies.

use std::collections::BTreeMap;
use std::path::Path;

use rdfrl_core::domains::Domain;
use rdfrl_core::eval::{
    delta_lambda_curve, eval_points, evaluate_theta, gridsize_sensitivity, nonidentifiability_sweep,
    train_optimal_level_set,
};
use rdfrl_core::training::{lambda_sweep, ObjectiveKind};

use crate::artifacts::{self, Manifest};
use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::plot::{line_chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Lambda,
    Gridsize,
    Nonident,
    DeltaLambda,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Lambda => "lambda",
            SweepKind::Gridsize => "gridsize",
            SweepKind::Nonident => "nonident",
            SweepKind::DeltaLambda => "delta-lambda",
        }
    }
}

impl std::str::FromStr for SweepKind {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        [SweepKind::Lambda, SweepKind::Gridsize, SweepKind::Nonident, SweepKind::DeltaLambda]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown sweep {s:?}; expected lambda, gridsize, nonident or delta-lambda")))
    }
}

/// Table plus chart for one sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub svg: String,
}

fn lambdas(cfg: &ExperimentConfig) -> &[f64] {
    if cfg.sweep.lambdas.is_empty() {
        &cfg.lambdas
    } else {
        &cfg.sweep.lambdas
    }
}

/// True when each value is at most the previous one (up to `tol`).
pub fn is_nonincreasing(values: &[f64], tol: f64) -> bool {
    values.windows(2).all(|p| p[1] <= p[0] + tol)
}

pub fn run_sweep(cfg: &ExperimentConfig, kind: SweepKind) -> CliResult<SweepOutput> {
    cfg.validate()?;
    let grid = cfg.eval_grid();
    let ws = eval_points(grid.lo, grid.hi, grid.n)?;
    let mut rows = Vec::new();
    let mut series: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    let mut note = None;
    let header: Vec<&'static str>;
    let (x_label, y_label);
    for &seed in &cfg.seeds {
        let domain = Domain::build(&cfg.env_for_seed(seed), cfg.planner())?;
        let pl = &domain.pipeline;
        let base = cfg.train_config(ObjectiveKind::Rdf, cfg.lambdas.first().copied().unwrap_or(0.0), seed);
        match kind {
            SweepKind::Lambda => {
                let ls = lambdas(cfg);
                for (l, res) in ls.iter().zip(lambda_sweep(pl, &base, ls)?) {
                    let run = evaluate_theta(pl, &res.theta, &ws, cfg.w_train, seed)?;
                    let avg = run.per_w.iter().sum::<f64>() / run.per_w.len() as f64;
                    rows.push(vec![seed.to_string(), l.to_string(), run.train.to_string(), avg.to_string()]);
                    series.entry(format!("J(avg) seed {seed}")).or_default().push((*l, avg));
                    series.entry(format!("J(train) seed {seed}")).or_default().push((*l, run.train));
                }
            }
            SweepKind::Gridsize => {
                let sizes: &[usize] = if cfg.sweep.grid_sizes.is_empty() { &[3, 5, 9] } else { &cfg.sweep.grid_sizes };
                for (n, _, report) in gridsize_sensitivity(pl, &base, sizes, &ws)? {
                    rows.push(vec![
                        seed.to_string(),
                        n.to_string(),
                        report.j_train_mean.to_string(),
                        report.j_avg_mean.to_string(),
                    ]);
                    series.entry(format!("J(avg) seed {seed}")).or_default().push((n as f64, report.j_avg_mean));
                }
            }
            SweepKind::Nonident => {
                let range = cfg
                    .sweep
                    .thetas
                    .as_ref()
                    .ok_or_else(|| CliError::Config("field `sweep.thetas` is required for nonident".into()))?;
                if pl.family.trainable.len() != 1 {
                    return Err(CliError::Config(format!(
                        "nonident sweeps need a one-parameter model, this one has {}",
                        pl.family.trainable.len()
                    )));
                }
                let h = (range.hi - range.lo) / (range.n - 1) as f64;
                let thetas: Vec<Vec<f64>> = (0..range.n).map(|i| vec![range.lo + i as f64 * h]).collect();
                let records = nonidentifiability_sweep(pl, &thetas, cfg.w_train, &ws)?;
                let (_, spread) = train_optimal_level_set(&records, 1e-9);
                note = Some(format!("spread of J(test) over train-optimal parameters: {spread:.2}"));
                for r in &records {
                    rows.push(vec![seed.to_string(), r.theta[0].to_string(), r.j_train.to_string(), r.j_test.to_string()]);
                    series.entry(format!("J(train) seed {seed}")).or_default().push((r.theta[0], r.j_train));
                    series.entry(format!("J(test) seed {seed}")).or_default().push((r.theta[0], r.j_test));
                }
            }
            SweepKind::DeltaLambda => {
                let curve = delta_lambda_curve(pl, &base, lambdas(cfg))?;
                let deltas: Vec<f64> = curve.iter().map(|c| c.1).collect();
                let trend = if is_nonincreasing(&deltas, 1e-9) { "non-increasing" } else { "not monotone" };
                note = Some(format!("delta vs lambda: {trend}"));
                for (l, d) in curve {
                    rows.push(vec![seed.to_string(), l.to_string(), d.to_string()]);
                    series.entry(format!("delta seed {seed}")).or_default().push((l, d));
                }
            }
        }
    }
    match kind {
        SweepKind::Lambda => {
            header = vec!["seed", "lambda", "j_train", "j_avg"];
            (x_label, y_label) = ("lambda", "return");
        }
        SweepKind::Gridsize => {
            header = vec!["seed", "grid_size", "j_train", "j_avg"];
            (x_label, y_label) = ("grid size", "J(avg)");
        }
        SweepKind::Nonident => {
            header = vec!["seed", "theta", "j_train", "j_test"];
            (x_label, y_label) = ("theta", "return");
        }
        SweepKind::DeltaLambda => {
            header = vec!["seed", "lambda", "delta"];
            (x_label, y_label) = ("lambda", "delta");
        }
    }
    let series: Vec<Series> = series.into_iter().map(|(name, points)| Series { name, points }).collect();
    let title = format!("{} sweep: {}", kind.name(), cfg.experiment_id);
    let svg = line_chart(&title, x_label, y_label, &series, note.as_deref())?;
    Ok(SweepOutput { header, rows, svg })
}

/// Writes `<dir>/sweep-<kind>/sweep.csv`, `sweep.svg` and a manifest.
pub fn cmd_sweep(cfg: &ExperimentConfig, kind: SweepKind, dir: &Path) -> CliResult<Manifest> {
    let out = run_sweep(cfg, kind)?;
    let mut files = BTreeMap::new();
    files.insert("sweep.csv".to_string(), artifacts::csv_string(&out.header, out.rows)?.into_bytes());
    files.insert("sweep.svg".to_string(), out.svg.into_bytes());
    artifacts::write_all(cfg, &dir.join(format!("sweep-{}", kind.name())), &files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in [SweepKind::Lambda, SweepKind::Gridsize, SweepKind::Nonident, SweepKind::DeltaLambda] {
            assert_eq!(k.name().parse::<SweepKind>().unwrap(), k);
        }
        assert!(matches!("fig4".parse::<SweepKind>(), Err(CliError::Usage(_))));
    }

    #[test]
    fn monotone_check() {
        assert!(is_nonincreasing(&[3.0, 2.0, 2.0, 0.0], 0.0));
        assert!(!is_nonincreasing(&[3.0, 4.0], 0.5));
        assert!(is_nonincreasing(&[], 0.0));
    }
}
