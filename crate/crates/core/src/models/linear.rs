use nalgebra::DMatrix;

use super::TransitionDataset;
use crate::envs::{Action, StateVec};
use crate::error::{Error, Result};

/// `s' = A s + B onehot(a) + bias`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    dim: usize,
    n_actions: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn new(dim: usize, n_actions: usize, a: Vec<f64>, b: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if a.len() != dim * dim || b.len() != dim * n_actions || bias.len() != dim {
            return Err(Error::config(format!(
                "linear model shapes do not match dim={dim}, actions={n_actions}"
            )));
        }
        Ok(LinearModel { dim, n_actions, a, b, bias })
    }

    pub fn identity(dim: usize, n_actions: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        LinearModel {
            dim,
            n_actions,
            a,
            b: vec![0.0; dim * n_actions],
            bias: vec![0.0; dim],
        }
    }

    pub fn state_dim(&self) -> usize {
        self.dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_params(&self) -> usize {
        self.dim * (self.dim + self.n_actions + 1)
    }

    /// Flat layout: `A` row-major, then `B` row-major, then `bias`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.a);
        p.extend_from_slice(&self.b);
        p.extend_from_slice(&self.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (na, nb) = (self.dim * self.dim, self.dim * self.n_actions);
        self.a.copy_from_slice(&p[..na]);
        self.b.copy_from_slice(&p[na..na + nb]);
        self.bias.copy_from_slice(&p[na + nb..]);
    }

    /// Flat indices of every parameter that feeds output row `i`.
    pub fn row_params(&self, i: usize) -> Vec<usize> {
        let d = self.dim;
        let mut idx: Vec<usize> = (0..d).map(|j| i * d + j).collect();
        idx.extend((0..self.n_actions).map(|k| d * d + i * self.n_actions + k));
        idx.push(d * d + d * self.n_actions + i);
        idx
    }

    pub fn predict(&self, s: &[f64], a: Action) -> StateVec {
        let d = self.dim;
        (0..d)
            .map(|i| {
                let row = &self.a[i * d..(i + 1) * d];
                row.iter().zip(s).map(|(x, y)| x * y).sum::<f64>()
                    + self.b[i * self.n_actions + a.0]
                    + self.bias[i]
            })
            .collect()
    }

    /// Non-zero entries `(param, output row, d s'_row / d param)` of the prediction Jacobian.
    pub fn jacobian(&self, s: &[f64], a: Action, out: &mut Vec<(usize, usize, f64)>) {
        let d = self.dim;
        for i in 0..d {
            for (j, &sj) in s.iter().enumerate() {
                if sj != 0.0 {
                    out.push((i * d + j, i, sj));
                }
            }
            out.push((d * d + i * self.n_actions + a.0, i, 1.0));
            out.push((d * d + d * self.n_actions + i, i, 1.0));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub model: LinearModel,
    /// Set when the unregularized design lacked full column rank and the
    /// minimum-norm solution was returned.
    pub rank_deficient: bool,
}

/// Least squares with an optional ridge penalty. The action one-hots already
/// span the intercept, so the fit carries it in `B` and leaves `bias` at zero.
pub fn mle_linear(data: &TransitionDataset, n_actions: usize, ridge: f64) -> Result<LinearFit> {
    let first = data
        .records
        .first()
        .ok_or_else(|| Error::config("cannot fit a model to an empty dataset"))?;
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::config("ridge must be finite and non-negative"));
    }
    let d = first.s.len();
    let p = d + n_actions;
    let n = data.records.len();
    let mut x = DMatrix::<f64>::zeros(n, p);
    let mut y = DMatrix::<f64>::zeros(n, d);
    for (r, t) in data.records.iter().enumerate() {
        if t.s.len() != d || t.next.len() != d || t.a.0 >= n_actions {
            return Err(Error::contract(format!("record {r} has inconsistent shape")));
        }
        for j in 0..d {
            x[(r, j)] = t.s[j];
            y[(r, j)] = t.next[j];
        }
        x[(r, d + t.a.0)] = 1.0;
    }

    let (coef, rank_deficient) = if ridge > 0.0 {
        let mut gram = x.transpose() * &x;
        for k in 0..p {
            gram[(k, k)] += ridge;
        }
        let rhs = x.transpose() * &y;
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::contract("ridge system is not positive definite"))?;
        (chol.solve(&rhs), false)
    } else {
        let svd = x.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let tol = smax * 1e-10 * (n.max(p) as f64);
        let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
        let coef = svd
            .solve(&y, tol)
            .map_err(|e| Error::contract(format!("least squares failed: {e}")))?;
        (coef, rank < p)
    };
    if rank_deficient {
        log::warn!("linear model design is rank deficient; using the minimum-norm solution");
    }

    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d * n_actions];
    for i in 0..d {
        for j in 0..d {
            a[i * d + j] = coef[(j, i)];
        }
        for k in 0..n_actions {
            b[i * n_actions + k] = coef[(d + k, i)];
        }
    }
    let model = LinearModel::new(d, n_actions, a, b, vec![0.0; d])?;
    crate::error::check_finite(&model.params(), "linear model fit")?;
    Ok(LinearFit { model, rank_deficient })
}
