use super::TransitionDataset;
use crate::envs::{Action, StateVec};
use crate::error::{Error, Result};

/// `s' = s + c * v_a` with one step length `c` shared by every action direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedScalarModel {
    pub c: f64,
    pub action_vectors: Vec<Vec<f64>>,
}

impl SharedScalarModel {
    pub const MIN_C: f64 = 1e-3;

    /// One-hot action directions in `dim` dimensions.
    pub fn axis_aligned(c: f64, dim: usize) -> Self {
        let action_vectors = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        SharedScalarModel { c, action_vectors }
    }

    pub fn state_dim(&self) -> usize {
        self.action_vectors.first().map_or(0, Vec::len)
    }

    pub fn predict(&self, s: &[f64], a: Action) -> StateVec {
        s.iter()
            .zip(&self.action_vectors[a.0])
            .map(|(x, v)| x + self.c * v)
            .collect()
    }
}

/// Least squares `c = sum <s' - s, v_a> / sum <v_a, v_a>`.
pub fn mle_shared_scalar(data: &TransitionDataset, action_vectors: &[Vec<f64>]) -> Result<SharedScalarModel> {
    if data.records.is_empty() {
        return Err(Error::config("cannot fit a model to an empty dataset"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for t in &data.records {
        let v = action_vectors
            .get(t.a.0)
            .ok_or_else(|| Error::contract(format!("action {} has no direction", t.a.0)))?;
        for ((x, y), vi) in t.s.iter().zip(&t.next).zip(v) {
            num += (y - x) * vi;
            den += vi * vi;
        }
    }
    if den == 0.0 {
        return Err(Error::config("action directions are all zero"));
    }
    Ok(SharedScalarModel {
        c: num / den,
        action_vectors: action_vectors.to_vec(),
    })
}
