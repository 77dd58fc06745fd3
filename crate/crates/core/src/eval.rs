//! Reported metrics: per-preference returns, averages over a test region,
//! percentile histograms and the sweeps built on them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::Preference;
use crate::error::{Error, Result};
use crate::objectives::{EvalMode, Pipeline};
use crate::planning::{discretize_true, value_iteration, GridPolicy, PolicyMode};
use crate::grid::GridSpec;
use crate::training::{train_df, train_rdf, ObjectiveKind, TrainConfig, TrainResult};

/// `n` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn eval_points(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if n == 0 || lo > hi {
        return Err(Error::config("evaluation grid needs n >= 1 and lo <= hi"));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let h = (hi - lo) / (n - 1) as f64;
    Ok((0..n).map(|i| if i + 1 == n { hi } else { lo + i as f64 * h }).collect())
}

/// Returns of one trained model (one seed) over the evaluation grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub per_w: Vec<f64>,
    pub train: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub w_train: f64,
    pub ws: Vec<f64>,
    pub per_w_mean: Vec<f64>,
    pub per_w_std: Vec<f64>,
    pub j_train_mean: f64,
    pub j_train_std: f64,
    pub j_avg_mean: f64,
    pub j_avg_std: f64,
    pub runs: Vec<SeedRun>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

impl EvalReport {
    /// Aggregates across seeds. `J(avg)` of a seed is the plain mean over `ws`.
    pub fn from_runs(method: &str, w_train: f64, ws: Vec<f64>, runs: Vec<SeedRun>) -> Result<Self> {
        if runs.is_empty() || ws.is_empty() {
            return Err(Error::config("a report needs at least one seed and one preference"));
        }
        if runs.iter().any(|r| r.per_w.len() != ws.len()) {
            return Err(Error::config("every seed must cover the full evaluation grid"));
        }
        let (per_w_mean, per_w_std): (Vec<f64>, Vec<f64>) = (0..ws.len())
            .map(|i| mean_std(&runs.iter().map(|r| r.per_w[i]).collect::<Vec<_>>()))
            .unzip();
        let trains: Vec<f64> = runs.iter().map(|r| r.train).collect();
        let avgs: Vec<f64> = runs
            .iter()
            .map(|r| r.per_w.iter().sum::<f64>() / ws.len() as f64)
            .collect();
        let (j_train_mean, j_train_std) = mean_std(&trains);
        let (j_avg_mean, j_avg_std) = mean_std(&avgs);
        Ok(EvalReport {
            method: method.to_string(),
            w_train,
            ws,
            per_w_mean,
            per_w_std,
            j_train_mean,
            j_train_std,
            j_avg_mean,
            j_avg_std,
            runs,
        })
    }
}

/// Replans `theta` for every preference in `ws` and for `w_train`, scoring
/// each greedy policy in the true environment.
pub fn evaluate_theta(pipeline: &Pipeline, theta: &[f64], ws: &[f64], w_train: f64, seed: u64) -> Result<SeedRun> {
    let dm = pipeline.discretize(theta, false)?;
    let mut points = ws.to_vec();
    points.push(w_train);
    let rets: Vec<f64> = points
        .par_iter()
        .map(|&w| {
            let pref = Preference::scalar(w)?;
            let plan = pipeline.hard_plan(&dm, theta, &pref)?;
            pipeline.plan_return(plan, &pref, seed)
        })
        .collect::<Result<_>>()?;
    let train = rets[ws.len()];
    Ok(SeedRun { seed, per_w: rets[..ws.len()].to_vec(), train })
}

/// [`evaluate_theta`] for each seed, aggregated into a report.
pub fn test_region_sweep(
    pipeline: &Pipeline,
    method: &str,
    theta: &[f64],
    ws: &[f64],
    w_train: f64,
    seeds: &[u64],
) -> Result<EvalReport> {
    if ws.is_empty() || seeds.is_empty() {
        return Err(Error::config("test-region sweep needs preferences and seeds"));
    }
    let runs = seeds
        .iter()
        .map(|&s| evaluate_theta(pipeline, theta, ws, w_train, s))
        .collect::<Result<Vec<_>>>()?;
    EvalReport::from_runs(method, w_train, ws.to_vec(), runs)
}

/// Returns of policies planned on the true dynamics projected onto `grid`.
pub fn oracle_run(pipeline: &Pipeline, grid: &GridSpec, ws: &[f64], w_train: f64, seed: u64) -> Result<SeedRun> {
    let dm = discretize_true(pipeline.env.as_ref(), grid)?;
    let mut points = ws.to_vec();
    points.push(w_train);
    let rets: Vec<f64> = points
        .par_iter()
        .map(|&w| {
            let pref = Preference::scalar(w)?;
            let q = value_iteration(&dm.mdp(&pref)?, pipeline.planner.tol, pipeline.planner.max_iters);
            let policy = GridPolicy { grid: grid.clone(), lookup: pipeline.lookup, q, mode: PolicyMode::Greedy };
            pipeline.true_return(&policy, &pref, seed)
        })
        .collect::<Result<_>>()?;
    let train = rets[ws.len()];
    Ok(SeedRun { seed, per_w: rets[..ws.len()].to_vec(), train })
}

/// One method's returns on a `(w, seed)` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodReturns {
    pub method: String,
    /// `(w, seed, return)` in lattice order.
    pub returns: Vec<(f64, u64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub method: String,
    /// Percentile score per lattice point.
    pub scores: Vec<f64>,
    /// Counts in `[0,10), [10,20), ..., [90,100]`.
    pub bins: [usize; 10],
}

/// Per lattice point, `100 (J - min) / (max - min)` over all methods
/// (100 for everyone when the range is empty), binned into deciles.
pub fn percentile_histogram(methods: &[MethodReturns]) -> Result<Vec<Histogram>> {
    let first = methods.first().ok_or_else(|| Error::config("no methods to rank"))?;
    for m in methods {
        let same = m.returns.len() == first.returns.len()
            && m.returns.iter().zip(&first.returns).all(|(a, b)| a.0 == b.0 && a.1 == b.1);
        if !same {
            return Err(Error::config(format!("method {} is on a different (w, seed) lattice", m.method)));
        }
    }
    let n = first.returns.len();
    let mut out: Vec<Histogram> = methods
        .iter()
        .map(|m| Histogram { method: m.method.clone(), scores: Vec::with_capacity(n), bins: [0; 10] })
        .collect();
    for i in 0..n {
        let vals: Vec<f64> = methods.iter().map(|m| m.returns[i].2).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (h, v) in out.iter_mut().zip(&vals) {
            let pct = if hi > lo { 100.0 * ((v - lo) / (hi - lo)) } else { 100.0 };
            let bin = ((pct / 10.0).floor() as usize).min(9);
            h.scores.push(pct);
            h.bins[bin] += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub theta: Vec<f64>,
    pub j_train: f64,
    pub j_test: f64,
}

/// Training return and test-region average for every parameter vector.
pub fn nonidentifiability_sweep(
    pipeline: &Pipeline,
    thetas: &[Vec<f64>],
    w_train: f64,
    test_ws: &[f64],
) -> Result<Vec<SweepRecord>> {
    if thetas.is_empty() || test_ws.is_empty() {
        return Err(Error::config("sweep needs parameters and test preferences"));
    }
    thetas
        .iter()
        .map(|theta| {
            let run = evaluate_theta(pipeline, theta, test_ws, w_train, 0)?;
            Ok(SweepRecord {
                theta: theta.clone(),
                j_train: run.train,
                j_test: run.per_w.iter().sum::<f64>() / test_ws.len() as f64,
            })
        })
        .collect()
}

/// Records whose training return is within `tol` of the best one, and the
/// spread (max - min) of their test averages.
pub fn train_optimal_level_set(records: &[SweepRecord], tol: f64) -> (Vec<&SweepRecord>, f64) {
    let best = records.iter().map(|r| r.j_train).fold(f64::NEG_INFINITY, f64::max);
    let set: Vec<&SweepRecord> = records.iter().filter(|r| r.j_train >= best - tol).collect();
    let lo = set.iter().map(|r| r.j_test).fold(f64::INFINITY, f64::min);
    let hi = set.iter().map(|r| r.j_test).fold(f64::NEG_INFINITY, f64::max);
    let spread = if set.is_empty() { 0.0 } else { hi - lo };
    (set, spread)
}

/// `delta(lambda) = J_train(DF) - J_train(RDF(lambda))`, with greedy returns.
pub fn delta_lambda_curve(pipeline: &Pipeline, cfg: &TrainConfig, lambdas: &[f64]) -> Result<Vec<(f64, f64)>> {
    if lambdas.is_empty() {
        return Err(Error::config("lambda list is empty"));
    }
    let df = train_df(pipeline, cfg)?;
    let j_df = pipeline.evaluate(&df.theta, cfg.w_train, EvalMode::Greedy)?;
    lambdas
        .iter()
        .map(|&l| {
            let mut c = cfg.clone();
            c.kind = ObjectiveKind::Rdf;
            c.lambda = l;
            let rdf = train_rdf(pipeline, &c)?;
            let j = pipeline.evaluate(&rdf.theta, cfg.w_train, EvalMode::Greedy)?;
            Ok((l, j_df - j))
        })
        .collect()
}

/// Robust training for each preference-grid size, each evaluated on `ws`.
pub fn gridsize_sensitivity(
    pipeline: &Pipeline,
    cfg: &TrainConfig,
    sizes: &[usize],
    ws: &[f64],
) -> Result<Vec<(usize, TrainResult, EvalReport)>> {
    if let Some(&bad) = sizes.iter().find(|&&s| s < 2) {
        return Err(Error::config(format!("grid size {bad} is below 2")));
    }
    sizes
        .iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.kind = ObjectiveKind::Rdf;
            c.grid_size = n;
            let res = train_rdf(pipeline, &c)?;
            let report = test_region_sweep(pipeline, &format!("rdf_n{n}"), &res.theta, ws, cfg.w_train, &[c.seed])?;
            Ok((n, res, report))
        })
        .collect()
}
