use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density over the preference support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    #[default]
    Uniform,
    /// Piecewise-linear density through `(w, value)` knots, sorted by `w`.
    Tabulated(Vec<(f64, f64)>),
}

impl Density {
    fn at(&self, w: f64) -> f64 {
        match self {
            Density::Uniform => 1.0,
            Density::Tabulated(knots) => {
                if knots.is_empty() {
                    return 1.0;
                }
                if w <= knots[0].0 {
                    return knots[0].1;
                }
                for pair in knots.windows(2) {
                    let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
                    if w <= x1 {
                        let t = if x1 > x0 { (w - x0) / (x1 - x0) } else { 0.0 };
                        return y0 + t * (y1 - y0);
                    }
                }
                knots[knots.len() - 1].1
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceDist {
    /// Disjoint closed intervals inside `[0, 1]`.
    pub support: Vec<(f64, f64)>,
    #[serde(default)]
    pub density: Density,
}

impl PreferenceDist {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let d = PreferenceDist { support: vec![(lo, hi)], density: Density::Uniform };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() {
            return Err(Error::config("preference support is empty"));
        }
        for &(lo, hi) in &self.support {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                return Err(Error::config(format!("invalid preference interval [{lo}, {hi}]")));
            }
        }
        if let Density::Tabulated(knots) = &self.density {
            if knots.iter().any(|&(_, y)| !(y >= 0.0) || !y.is_finite()) {
                return Err(Error::config("tabulated density must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// How grid points are weighted in the average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridWeighting {
    /// Every point weighs `1/n` (scaled by the density when tabulated).
    #[default]
    Uniform,
    /// Trapezoid rule on each interval: endpoints weigh half as much.
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceGrid {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PreferenceGrid {
    /// Single point with weight one.
    pub fn singleton(w: f64) -> Self {
        PreferenceGrid { points: vec![w], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn average(&self, values: &[f64]) -> f64 {
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * h })
        .collect()
}

/// `n` evenly spaced points covering each support interval, endpoints included.
/// With several intervals the points are split in proportion to length, at
/// least two per non-degenerate interval.
pub fn preference_grid(dist: &PreferenceDist, n: usize, weighting: GridWeighting) -> Result<PreferenceGrid> {
    dist.validate()?;
    if n < 2 {
        return Err(Error::config(format!("preference grid needs at least 2 points, got {n}")));
    }
    let mut intervals = dist.support.clone();
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let counts: Vec<usize> = if intervals.len() == 1 {
        vec![n]
    } else {
        let min_each: Vec<usize> = intervals.iter().map(|&(lo, hi)| if hi > lo { 2 } else { 1 }).collect();
        let base: usize = min_each.iter().sum();
        if n < base {
            return Err(Error::config(format!("{n} points cannot cover {} intervals", intervals.len())));
        }
        let total: f64 = intervals.iter().map(|(lo, hi)| hi - lo).sum();
        let spare = n - base;
        let mut counts: Vec<usize> = intervals
            .iter()
            .zip(&min_each)
            .map(|(&(lo, hi), &m)| {
                let share = if total > 0.0 { (hi - lo) / total } else { 0.0 };
                m + (share * spare as f64).floor() as usize
            })
            .collect();
        let mut left = n - counts.iter().sum::<usize>();
        let mut i = 0;
        while left > 0 {
            if intervals[i].1 > intervals[i].0 {
                counts[i] += 1;
                left -= 1;
            }
            i = (i + 1) % counts.len();
        }
        counts
    };

    let mut points = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for (&(lo, hi), &c) in intervals.iter().zip(&counts) {
        let pts = linspace(lo, hi, c);
        for (i, &p) in pts.iter().enumerate() {
            let base = match weighting {
                GridWeighting::Uniform => 1.0,
                GridWeighting::Trapezoid if c == 1 => 1.0,
                GridWeighting::Trapezoid => {
                    let h = (hi - lo) / (c - 1) as f64;
                    if i == 0 || i + 1 == c { h / 2.0 } else { h }
                }
            };
            raw.push(base * dist.density.at(p));
            points.push(p);
        }
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::config("preference density vanishes on every grid point"));
    }
    let weights = match (&dist.density, weighting) {
        (Density::Uniform, GridWeighting::Uniform) => vec![1.0 / n as f64; n],
        _ => raw.iter().map(|r| r / total).collect(),
    };
    Ok(PreferenceGrid { points, weights })
}

/// Lagrangian trade-off between the grid average and the training preference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangianConfig {
    pub lambda: f64,
    pub w_train: f64,
}

impl LagrangianConfig {
    pub fn new(lambda: f64, w_train: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be finite and non-negative, got {lambda}")));
        }
        if !(0.0..=1.0).contains(&w_train) {
            return Err(Error::config(format!("w_train={w_train} outside [0, 1]")));
        }
        Ok(LagrangianConfig { lambda, w_train })
    }
}
