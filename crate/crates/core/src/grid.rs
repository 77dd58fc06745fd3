//! Regular grids over boxes, with nearest-node and multilinear lookup.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    nodes: Vec<usize>,
}

/// Multilinear interpolation weights, optionally with their derivatives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interp {
    pub corners: Vec<(usize, f64)>,
    /// `grad[k * dim + d]` is `d weight_k / d s_d`. Empty unless requested.
    pub grad: Vec<f64>,
    pub clamped: bool,
}

struct Axis {
    lo: usize,
    frac: f64,
    two: bool,
    slope: f64,
}

impl GridSpec {
    /// `nodes[d]` evenly spaced points over `[lower[d], upper[d]]`, endpoints included.
    /// A single node pins that coordinate to `lower[d]`.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != nodes.len() || lower.is_empty() {
            return Err(Error::config("grid bounds and node counts must have equal, non-zero length"));
        }
        for d in 0..lower.len() {
            if !lower[d].is_finite() || !upper[d].is_finite() {
                return Err(Error::config(format!("grid bound in dimension {d} is not finite")));
            }
            if nodes[d] == 0 {
                return Err(Error::config(format!("grid dimension {d} has no nodes")));
            }
            if nodes[d] >= 2 && upper[d] <= lower[d] {
                return Err(Error::config(format!(
                    "grid dimension {d}: upper {} must exceed lower {}",
                    upper[d], lower[d]
                )));
            }
        }
        Ok(GridSpec { lower, upper, nodes })
    }

    /// Grid with spacing `resolution` over `[lo, hi]` in every dimension.
    pub fn uniform(dim: usize, lo: f64, hi: f64, resolution: f64) -> Result<Self> {
        if resolution <= 0.0 {
            return Err(Error::config("grid resolution must be positive"));
        }
        let n = ((hi - lo) / resolution).round() as usize + 1;
        GridSpec::new(vec![lo; dim], vec![hi; dim], vec![n; dim])
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, d: usize) -> f64 {
        if self.nodes[d] < 2 {
            0.0
        } else {
            (self.upper[d] - self.lower[d]) / (self.nodes[d] - 1) as f64
        }
    }

    pub fn coord(&self, d: usize, i: usize) -> f64 {
        if self.nodes[d] < 2 {
            return self.lower[d];
        }
        if i + 1 == self.nodes[d] {
            return self.upper[d];
        }
        self.lower[d] + i as f64 * self.spacing(d)
    }

    /// Row-major with the last dimension fastest.
    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.nodes)
            .fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for d in (0..self.dim()).rev() {
            out[d] = flat % self.nodes[d];
            flat /= self.nodes[d];
        }
        out
    }

    pub fn node_state(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.coord(d, i))
            .collect()
    }

    fn position(&self, d: usize, x: f64) -> (f64, bool) {
        let n = self.nodes[d];
        if n < 2 {
            return (0.0, (x - self.lower[d]).abs() > SNAP);
        }
        let h = self.spacing(d);
        let clamped = x < self.lower[d] - SNAP * h || x > self.upper[d] + SNAP * h;
        let pos = ((x - self.lower[d]) / h).clamp(0.0, (n - 1) as f64);
        (pos, clamped)
    }

    /// Nearest node per dimension (ties round up) and whether `s` lay outside the box.
    pub fn nearest_multi(&self, s: &[f64]) -> (Vec<usize>, bool) {
        let mut clamped = false;
        let multi = (0..self.dim())
            .map(|d| {
                let (pos, c) = self.position(d, s[d]);
                clamped |= c;
                (pos + 0.5).floor().min((self.nodes[d] - 1) as f64) as usize
            })
            .collect();
        (multi, clamped)
    }

    pub fn nearest(&self, s: &[f64]) -> (usize, bool) {
        let (multi, clamped) = self.nearest_multi(s);
        (self.flat_index(&multi), clamped)
    }

    fn axis(&self, d: usize, x: f64, want_grad: bool) -> (Axis, bool) {
        let n = self.nodes[d];
        let (pos, clamped) = self.position(d, x);
        if n < 2 {
            return (Axis { lo: 0, frac: 0.0, two: false, slope: 0.0 }, clamped);
        }
        let mut lo = pos.floor() as usize;
        let mut frac = pos - lo as f64;
        if frac > 1.0 - SNAP {
            lo += 1;
            frac = 0.0;
        } else if frac < SNAP {
            frac = 0.0;
        }
        if lo >= n - 1 {
            lo = n - 1;
            frac = 0.0;
        }
        let interior = lo < n - 1;
        let slope = if clamped || !interior { 0.0 } else { 1.0 / self.spacing(d) };
        let two = interior && (frac > 0.0 || (want_grad && slope > 0.0));
        (Axis { lo, frac, two, slope }, clamped)
    }

    /// Multilinear weights of `s` over the surrounding nodes. Points outside
    /// the box are clamped onto it and flagged. Zero weights are dropped.
    pub fn interpolate(&self, s: &[f64]) -> Interp {
        self.interpolate_impl(s, None)
    }

    /// As [`GridSpec::interpolate`], also returning weight derivatives for the
    /// dimensions flagged in `need`. Zero-weight corners are kept when their
    /// derivative can be non-zero.
    pub fn interpolate_grad(&self, s: &[f64], need: &[bool]) -> Interp {
        self.interpolate_impl(s, Some(need))
    }

    fn interpolate_impl(&self, s: &[f64], need: Option<&[bool]>) -> Interp {
        let dim = self.dim();
        let mut clamped = false;
        let axes: Vec<Axis> = (0..dim)
            .map(|d| {
                let want = need.map(|m| m[d]).unwrap_or(false);
                let (ax, c) = self.axis(d, s[d], want);
                clamped |= c;
                ax
            })
            .collect();
        let free: Vec<usize> = (0..dim).filter(|&d| axes[d].two).collect();
        let n_corners = 1usize << free.len();
        let mut out = Interp {
            corners: Vec::with_capacity(n_corners),
            grad: Vec::new(),
            clamped,
        };
        let mut multi: Vec<usize> = axes.iter().map(|a| a.lo).collect();
        let mut dw = vec![0.0; dim];
        for mask in 0..n_corners {
            let mut weight = 1.0;
            for (bit, &d) in free.iter().enumerate() {
                let up = mask >> bit & 1 == 1;
                multi[d] = axes[d].lo + up as usize;
                weight *= if up { axes[d].frac } else { 1.0 - axes[d].frac };
            }
            if let Some(need) = need {
                for d in 0..dim {
                    dw[d] = 0.0;
                    if !need[d] || !axes[d].two || axes[d].slope == 0.0 {
                        continue;
                    }
                    let bit = free.iter().position(|&f| f == d).unwrap();
                    let mut g = if mask >> bit & 1 == 1 { axes[d].slope } else { -axes[d].slope };
                    for (b2, &d2) in free.iter().enumerate() {
                        if d2 != d {
                            g *= if mask >> b2 & 1 == 1 { axes[d2].frac } else { 1.0 - axes[d2].frac };
                        }
                    }
                    dw[d] = g;
                }
                if weight == 0.0 && dw.iter().all(|&g| g == 0.0) {
                    continue;
                }
                out.corners.push((self.flat_index(&multi), weight));
                out.grad.extend_from_slice(&dw);
            } else if weight > 0.0 {
                out.corners.push((self.flat_index(&multi), weight));
            }
        }
        out
    }
}
