use nalgebra::{DMatrix, DVector};

use crate::envs::{combine_rewards, Action, Environment, Preference, StateVec};
use crate::error::{check_finite, Error, Result};
use crate::grid::GridSpec;
use crate::models::{model_predict, Prediction, TransitionModel};

const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// Hat functions on grid nodes: one-hot at a node, multilinear in between.
    Grid(GridSpec),
    /// `1, x_i, x_i x_j (i <= j)`.
    Poly2 { dim: usize },
}

impl Features {
    pub fn len(&self) -> usize {
        match self {
            Features::Grid(g) => g.len(),
            Features::Poly2 { dim } => 1 + dim + dim * (dim + 1) / 2,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval(&self, s: &[f64]) -> Vec<(usize, f64)> {
        match self {
            Features::Grid(g) => g.interpolate(s).corners,
            Features::Poly2 { dim } => {
                let mut out = Vec::with_capacity(self.len());
                out.push((0, 1.0));
                for i in 0..*dim {
                    out.push((out.len(), s[i]));
                }
                for i in 0..*dim {
                    for j in i..*dim {
                        out.push((out.len(), s[i] * s[j]));
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FqiWeights {
    pub features: Features,
    pub n_actions: usize,
    /// Action-major: `weights[a * features.len() + f]`.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// A ridge term had to be added to a singular regression.
    pub ridge_fallback: bool,
}

impl FqiWeights {
    pub fn q_values(&self, s: &[f64]) -> Vec<f64> {
        let phi = self.features.eval(s);
        q_from(&phi, &self.weights, self.features.len(), self.n_actions)
    }
}

fn q_from(phi: &[(usize, f64)], w: &[f64], p: usize, k: usize) -> Vec<f64> {
    (0..k)
        .map(|a| phi.iter().map(|&(f, x)| x * w[a * p + f]).sum())
        .collect()
}

struct Successor {
    prob: f64,
    reward: f64,
    terminal: bool,
    phi: Vec<(usize, f64)>,
}

enum Solver {
    Dense(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Sparse { rows: Vec<Vec<(usize, f64)>> },
}

impl Solver {
    fn build(phis: &[Vec<(usize, f64)>], p: usize, ridge: f64) -> (Solver, bool) {
        if p <= DENSE_LIMIT {
            let mut g = DMatrix::<f64>::zeros(p, p);
            for phi in phis {
                for &(i, xi) in phi {
                    for &(j, xj) in phi {
                        g[(i, j)] += xi * xj;
                    }
                }
            }
            let trace = g.trace();
            let mut with_ridge = g.clone();
            for i in 0..p {
                with_ridge[(i, i)] += ridge;
            }
            if let Some(c) = with_ridge.cholesky() {
                if ridge > 0.0 || min_pivot(&c) > 1e-12 * trace.max(1.0) {
                    return (Solver::Dense(c), false);
                }
            }
            let fallback = ridge + 1e-8 * (trace / p as f64).max(1.0);
            for i in 0..p {
                g[(i, i)] += fallback;
            }
            let c = g.cholesky().expect("ridge-regularized Gram matrix is positive definite");
            (Solver::Dense(c), true)
        } else {
            let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); p];
            for phi in phis {
                for &(i, xi) in phi {
                    for &(j, xj) in phi {
                        *rows[i].entry(j).or_insert(0.0) += xi * xj;
                    }
                }
            }
            let mut fallback = false;
            let extra = if ridge == 0.0 && rows.iter().enumerate().any(|(i, r)| r.get(&i).copied().unwrap_or(0.0) <= 0.0) {
                fallback = true;
                1e-8
            } else {
                ridge
            };
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(i, mut r)| {
                    *r.entry(i).or_insert(0.0) += extra;
                    r.into_iter().collect()
                })
                .collect();
            (Solver::Sparse { rows }, fallback)
        }
    }

    fn solve(&self, b: &[f64], warm: &[f64]) -> Vec<f64> {
        match self {
            Solver::Dense(c) => c.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
            Solver::Sparse { rows } => conjugate_gradient(rows, b, warm),
        }
    }
}

fn min_pivot(c: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min)
}

fn conjugate_gradient(rows: &[Vec<(usize, f64)>], b: &[f64], x0: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mul = |x: &[f64], out: &mut [f64]| {
        for (i, row) in rows.iter().enumerate() {
            out[i] = row.iter().map(|&(j, v)| v * x[j]).sum();
        }
    };
    let mut x = x0.to_vec();
    let mut ax = vec![0.0; n];
    mul(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut d = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let bnorm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut ad = vec![0.0; n];
    for _ in 0..(10 * n).max(100) {
        if rr.sqrt() <= 1e-13 * bnorm {
            break;
        }
        mul(&d, &mut ad);
        let alpha = rr / d.iter().zip(&ad).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            d[i] = r[i] + beta * d[i];
        }
    }
    x
}

/// `horizon` backward passes of least-squares regression onto one-step
/// Bellman targets computed through the model.
pub fn fitted_q_iteration(
    model: &TransitionModel,
    env: &dyn Environment,
    w: &Preference,
    features: &Features,
    horizon: usize,
    samples: &[StateVec],
    ridge: f64,
) -> Result<FqiWeights> {
    if samples.is_empty() {
        return Err(Error::config("fitted Q iteration needs at least one sample state"));
    }
    let spec = env.spec();
    let k = spec.n_actions;
    let p = features.len();
    let gamma = spec.gamma;
    let phis: Vec<Vec<(usize, f64)>> = samples.iter().map(|s| features.eval(s)).collect();
    let terminal: Vec<bool> = samples.iter().map(|s| env.is_terminal(s)).collect();

    let mut succ: Vec<Vec<Successor>> = Vec::with_capacity(samples.len() * k);
    for (s, &term) in samples.iter().zip(&terminal) {
        for a in 0..k {
            if term {
                succ.push(Vec::new());
                continue;
            }
            let (pred, _) = model_predict(model, s, Action(a))?;
            let list = match pred {
                Prediction::Point(next) => vec![(1.0, next)],
                Prediction::Cells(cells) => match model {
                    TransitionModel::Tabular(m) => cells
                        .into_iter()
                        .map(|(c, pr)| (pr, m.grid().node_state(c)))
                        .collect(),
                    _ => unreachable!("only tabular models predict cells"),
                },
            };
            let mut out = Vec::with_capacity(list.len());
            for (prob, next) in list {
                let r = combine_rewards(w, &env.reward_bases(s, Action(a), &next))?;
                let t = env.is_terminal(&next);
                out.push(Successor {
                    prob,
                    reward: r,
                    terminal: t,
                    phi: if t { Vec::new() } else { features.eval(&next) },
                });
            }
            succ.push(out);
        }
    }

    let (solver, ridge_fallback) = Solver::build(&phis, p, ridge);
    if ridge_fallback {
        log::warn!("fitted Q regression was singular; added a ridge term");
    }
    let mut weights = vec![0.0; k * p];
    for _ in 0..horizon {
        let mut next_w = vec![0.0; k * p];
        for a in 0..k {
            let mut b = vec![0.0; p];
            for (i, phi) in phis.iter().enumerate() {
                let y: f64 = succ[i * k + a]
                    .iter()
                    .map(|sc| {
                        let cont = if sc.terminal {
                            0.0
                        } else {
                            q_from(&sc.phi, &weights, p, k)
                                .into_iter()
                                .fold(f64::NEG_INFINITY, f64::max)
                        };
                        sc.prob * (sc.reward + gamma * cont)
                    })
                    .sum();
                for &(f, x) in phi {
                    b[f] += x * y;
                }
            }
            let sol = solver.solve(&b, &weights[a * p..(a + 1) * p]);
            next_w[a * p..(a + 1) * p].copy_from_slice(&sol);
        }
        weights = next_w;
        check_finite(&weights, "fitted Q weights")?;
    }
    Ok(FqiWeights {
        features: features.clone(),
        n_actions: k,
        weights,
        iterations: horizon,
        ridge_fallback,
    })
}
