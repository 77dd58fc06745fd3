//! `run`: train every configured method per seed, evaluate, write artifacts.

use std::collections::BTreeMap;
use std::path::Path;

use rdfrl_core::domains::Domain;
use rdfrl_core::eval::{eval_points, evaluate_theta, oracle_run, EvalReport, SeedRun};
use rdfrl_core::training::{train_df, train_rdf, ObjectiveKind};

use crate::artifacts::{self, Manifest};
use crate::config::{ExperimentConfig, Method};
use crate::error::CliResult;

pub const RESULTS_HEADER: [&str; 8] = ["experiment_id", "method", "env", "w_train", "lambda", "w", "seed", "ret"];
pub const SUMMARY_HEADER: [&str; 5] = ["method", "j_train_mean", "j_train_std", "j_avg_mean", "j_avg_std"];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: String,
    pub lambda: Option<f64>,
    pub w: f64,
    pub seed: u64,
    pub ret: f64,
}

/// One trained (or oracle) method across all seeds.
#[derive(Debug, Clone)]
pub struct MethodRun {
    pub label: String,
    pub method: Method,
    pub lambda: Option<f64>,
    /// Parameters per seed; empty for the oracle.
    pub thetas: Vec<Vec<f64>>,
    pub report: EvalReport,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ws: Vec<f64>,
    pub methods: Vec<MethodRun>,
    /// `(file name, contents)` of model checkpoints.
    pub checkpoints: Vec<(String, String)>,
}

struct Slot {
    label: String,
    method: Method,
    lambda: Option<f64>,
}

fn slots(cfg: &ExperimentConfig) -> Vec<Slot> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        match m {
            Method::Rdf => {
                for &l in &cfg.lambdas {
                    let label = if cfg.lambdas.len() == 1 { "RDF".to_string() } else { format!("RDF[{l}]") };
                    out.push(Slot { label, method: m, lambda: Some(l) });
                }
            }
            _ => out.push(Slot { label: m.label().into(), method: m, lambda: None }),
        }
    }
    out
}

pub fn run_experiment(cfg: &ExperimentConfig) -> CliResult<RunOutput> {
    cfg.validate()?;
    let grid = cfg.eval_grid();
    let ws = eval_points(grid.lo, grid.hi, grid.n)?;
    let slots = slots(cfg);
    let mut runs: Vec<Vec<SeedRun>> = vec![Vec::new(); slots.len()];
    let mut thetas: Vec<Vec<Vec<f64>>> = vec![Vec::new(); slots.len()];
    let mut checkpoints = Vec::new();
    for &seed in &cfg.seeds {
        let domain = Domain::build(&cfg.env_for_seed(seed), cfg.planner())?;
        let pl = &domain.pipeline;
        for (i, slot) in slots.iter().enumerate() {
            let theta = match slot.method {
                Method::True => {
                    runs[i].push(oracle_run(pl, &pl.grid, &ws, cfg.w_train, seed)?);
                    continue;
                }
                Method::Mle => domain.mle_theta(),
                Method::Df => train_df(pl, &cfg.train_config(ObjectiveKind::Df, 0.0, seed))?.theta,
                Method::Rdf => {
                    let lambda = slot.lambda.unwrap_or(0.0);
                    train_rdf(pl, &cfg.train_config(ObjectiveKind::Rdf, lambda, seed))?.theta
                }
            };
            log::info!("{} seed {seed}: theta has {} entries", slot.label, theta.len());
            runs[i].push(evaluate_theta(pl, &theta, &ws, cfg.w_train, seed)?);
            let model = pl.family.model(&theta)?;
            let mut extra = vec![("method", slot.label.clone()), ("seed", seed.to_string())];
            if let Some(l) = slot.lambda {
                extra.push(("lambda", l.to_string()));
            }
            checkpoints.push((format!("{}_seed{seed}.kv", file_stem(&slot.label)), model.to_kv_with(&extra)));
            thetas[i].push(theta);
        }
    }
    let methods = slots
        .into_iter()
        .zip(runs)
        .zip(thetas)
        .map(|((slot, runs), thetas)| {
            let report = EvalReport::from_runs(&slot.label, cfg.w_train, ws.clone(), runs)?;
            Ok(MethodRun { label: slot.label, method: slot.method, lambda: slot.lambda, thetas, report })
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(RunOutput { ws, methods, checkpoints })
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c.to_ascii_lowercase() } else { '_' })
        .collect::<String>()
        .trim_end_matches('_')
        .to_string()
}

impl RunOutput {
    /// Rows in method, seed, w order. The training preference gets its own
    /// row only when it is not on the evaluation grid.
    pub fn rows(&self, w_train: f64) -> Vec<ResultRow> {
        let extra_train = !self.ws.contains(&w_train);
        let mut rows = Vec::new();
        for m in &self.methods {
            for run in &m.report.runs {
                let mut push = |w: f64, ret: f64| {
                    rows.push(ResultRow { method: m.label.clone(), lambda: m.lambda, w, seed: run.seed, ret })
                };
                for (&w, &ret) in self.ws.iter().zip(&run.per_w) {
                    push(w, ret);
                }
                if extra_train {
                    push(w_train, run.train);
                }
            }
        }
        rows
    }

    pub fn method(&self, label: &str) -> Option<&MethodRun> {
        self.methods.iter().find(|m| m.label == label)
    }
}

pub fn results_csv(cfg: &ExperimentConfig, out: &RunOutput) -> CliResult<String> {
    let env = cfg.env.name();
    let records = out.rows(cfg.w_train).into_iter().map(|r| {
        vec![
            cfg.experiment_id.clone(),
            r.method,
            env.to_string(),
            cfg.w_train.to_string(),
            r.lambda.map(|l| l.to_string()).unwrap_or_default(),
            r.w.to_string(),
            r.seed.to_string(),
            r.ret.to_string(),
        ]
    });
    artifacts::csv_string(&RESULTS_HEADER, records)
}

pub fn summary_csv(out: &RunOutput) -> CliResult<String> {
    let records = out.methods.iter().map(|m| {
        let r = &m.report;
        vec![
            m.label.clone(),
            r.j_train_mean.to_string(),
            r.j_train_std.to_string(),
            r.j_avg_mean.to_string(),
            r.j_avg_std.to_string(),
        ]
    });
    artifacts::csv_string(&SUMMARY_HEADER, records)
}

/// Runs the experiment and writes results.csv, summary.csv, checkpoints and
/// manifest.json under `dir`.
pub fn cmd_run(cfg: &ExperimentConfig, dir: &Path) -> CliResult<Manifest> {
    artifacts::ensure_dir(dir)?;
    let out = match run_experiment(cfg) {
        Ok(out) => out,
        Err(e) => {
            artifacts::write_file(&dir.join("failure.txt"), format!("{e}\n").as_bytes())?;
            return Err(e);
        }
    };
    let mut files: BTreeMap<String, Vec<u8>> = BTreeMap::new();
    files.insert("results.csv".into(), results_csv(cfg, &out)?.into_bytes());
    files.insert("summary.csv".into(), summary_csv(&out)?.into_bytes());
    for (name, text) in out.checkpoints {
        files.insert(format!("checkpoints/{name}"), text.into_bytes());
    }
    artifacts::write_all(cfg, dir, &files)
}
