use super::TransitionDataset;
use crate::envs::Action;
use crate::error::{Error, Result};
use crate::grid::GridSpec;

/// Per (cell, action) softmax over a window of nearby successor cells.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularModel {
    grid: GridSpec,
    n_actions: usize,
    radius: Vec<usize>,
    offsets: Vec<Vec<isize>>,
    logits: Vec<f64>,
}

impl TabularModel {
    /// Uniform successor distributions. `radius[d]` is the window half-width in cells.
    pub fn uniform(grid: GridSpec, n_actions: usize, radius: Vec<usize>) -> Result<Self> {
        if radius.len() != grid.dim() {
            return Err(Error::config("window radius must have one entry per grid dimension"));
        }
        let mut offsets: Vec<Vec<isize>> = vec![vec![]];
        for &r in &radius {
            let r = r as isize;
            offsets = offsets
                .into_iter()
                .flat_map(|o| {
                    (-r..=r).map(move |k| {
                        let mut o = o.clone();
                        o.push(k);
                        o
                    })
                })
                .collect();
        }
        let logits = vec![0.0; grid.len() * n_actions * offsets.len()];
        Ok(TabularModel { grid, n_actions, radius, offsets, logits })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn radius(&self) -> &[usize] {
        &self.radius
    }

    pub fn window_len(&self) -> usize {
        self.offsets.len()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn set_logits(&mut self, z: &[f64]) {
        self.logits.copy_from_slice(z);
    }

    /// Offset of parameter block `(cell, a)` in the flat logit vector.
    pub fn block(&self, cell: usize, a: Action) -> usize {
        (cell * self.n_actions + a.0) * self.offsets.len()
    }

    /// Successor cell of window slot `k`, or `None` off the grid.
    pub fn target(&self, cell: usize, k: usize) -> Option<usize> {
        let multi = self.grid.multi_index(cell);
        let mut out = Vec::with_capacity(multi.len());
        for (d, (&i, &o)) in multi.iter().zip(&self.offsets[k]).enumerate() {
            let j = i as isize + o;
            if j < 0 || j >= self.grid.nodes()[d] as isize {
                return None;
            }
            out.push(j as usize);
        }
        Some(self.grid.flat_index(&out))
    }

    fn slot(&self, cell: usize, next: usize) -> usize {
        let from = self.grid.multi_index(cell);
        let to = self.grid.multi_index(next);
        let mut k = 0;
        for d in 0..from.len() {
            let r = self.radius[d] as isize;
            let o = (to[d] as isize - from[d] as isize).clamp(-r, r);
            k = k * (2 * r as usize + 1) + (o + r) as usize;
        }
        k
    }

    /// `(window slot, successor cell, probability)` over the valid window.
    pub fn slots(&self, cell: usize, a: Action) -> Vec<(usize, usize, f64)> {
        let base = self.block(cell, a);
        let valid: Vec<(usize, usize)> = (0..self.offsets.len())
            .filter_map(|k| self.target(cell, k).map(|t| (k, t)))
            .collect();
        let zmax = valid
            .iter()
            .map(|&(k, _)| self.logits[base + k])
            .fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<(usize, usize, f64)> = valid
            .iter()
            .map(|&(k, t)| (k, t, (self.logits[base + k] - zmax).exp()))
            .collect();
        let total: f64 = out.iter().map(|e| e.2).sum();
        for e in &mut out {
            e.2 /= total;
        }
        out
    }

    pub fn distribution(&self, cell: usize, a: Action) -> Vec<(usize, f64)> {
        self.slots(cell, a).into_iter().map(|(_, t, p)| (t, p)).collect()
    }
}

/// `(count + alpha) / (total + alpha * len)`; uniform when nothing was counted.
pub fn smoothed_frequencies(counts: &[f64], alpha: f64) -> Vec<f64> {
    let total: f64 = counts.iter().sum::<f64>() + alpha * counts.len() as f64;
    if total <= 0.0 {
        return vec![1.0 / counts.len() as f64; counts.len()];
    }
    counts.iter().map(|c| (c + alpha) / total).collect()
}

/// Smoothed empirical successor frequencies. Successors beyond the window
/// are assigned to the nearest window slot.
pub fn mle_tabular(
    data: &TransitionDataset,
    grid: GridSpec,
    n_actions: usize,
    radius: Vec<usize>,
    alpha: f64,
) -> Result<TabularModel> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::config("smoothing alpha must be finite and non-negative"));
    }
    let mut model = TabularModel::uniform(grid, n_actions, radius)?;
    let w = model.window_len();
    let mut counts = vec![0.0; model.logits.len()];
    let mut outside = 0usize;
    for t in &data.records {
        if t.a.0 >= n_actions {
            return Err(Error::contract(format!("action {} out of range", t.a.0)));
        }
        let (cell, c1) = model.grid.nearest(&t.s);
        let (next, c2) = model.grid.nearest(&t.next);
        outside += (c1 || c2) as usize;
        let k = model.slot(cell, next);
        counts[model.block(cell, t.a) + k] += 1.0;
    }
    if outside > 0 {
        log::warn!("{outside} transitions fell outside the grid and were clamped");
    }
    for cell in 0..model.grid.len() {
        for a in 0..n_actions {
            let base = model.block(cell, Action(a));
            let valid: Vec<usize> = (0..w).filter(|&k| model.target(cell, k).is_some()).collect();
            let c: Vec<f64> = valid.iter().map(|&k| counts[base + k]).collect();
            let p = smoothed_frequencies(&c, alpha);
            for k in 0..w {
                model.logits[base + k] = -700.0;
            }
            for (&k, &pk) in valid.iter().zip(&p) {
                model.logits[base + k] = pk.max(1e-300).ln();
            }
        }
    }
    Ok(model)
}
