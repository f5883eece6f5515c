//! Map between sequences and functions on `[0, 1]` through the sine basis
//! `e_i(t) = √2 sin((i - ½)πt)` with eigenvalues `λ_i = 1/(π(i - ½))²`.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::ParamVector;

/// Evaluation points in `(0, 1]`, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionGrid {
    points: Vec<f64>,
}

impl FunctionGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return domain("function grid is empty");
        }
        if points.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
            return domain("grid points must lie in (0, 1]");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return domain("grid points must be strictly increasing");
        }
        Ok(Self { points })
    }

    /// `{i/n : i = 1..=n}`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new((1..=n).map(|i| i as f64 / n as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl Default for FunctionGrid {
    fn default() -> Self {
        Self::uniform(1000).expect("valid grid")
    }
}

/// `√2 sin((i - ½)πt)` for `i ≥ 1`.
pub fn basis_function(i: usize, t: f64) -> Result<f64> {
    if i == 0 {
        return domain("basis index starts at 1");
    }
    Ok(SQRT_2 * ((i as f64 - 0.5) * PI * t).sin())
}

/// `√λ_i = 1/(π(i - ½))`.
pub fn sqrt_eigenvalue(i: usize) -> f64 {
    1.0 / (PI * (i as f64 - 0.5))
}

/// Scaled basis `√λ_i e_i(t_k)` tabulated on a grid, row `i - 1` per index.
#[derive(Debug, Clone)]
pub struct BasisTable {
    d: usize,
    n: usize,
    values: Vec<f64>,
}

impl BasisTable {
    pub fn new(d: usize, grid: &FunctionGrid) -> Self {
        let n = grid.len();
        let mut values = Vec::with_capacity(d * n);
        for i in 1..=d {
            let s = sqrt_eigenvalue(i);
            let w = (i as f64 - 0.5) * PI;
            values.extend(grid.points().iter().map(|&t| s * SQRT_2 * (w * t).sin()));
        }
        Self { d, n, values }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `F(t_k) = Σ_{i≤d} θ_i √λ_i e_i(t_k)`; coordinates past the table are ignored.
    pub fn apply(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &th) in theta.iter().take(self.d).enumerate() {
            if th == 0.0 {
                continue;
            }
            let row = &self.values[i * self.n..(i + 1) * self.n];
            for (o, &b) in out.iter_mut().zip(row) {
                *o += th * b;
            }
        }
        out
    }
}

/// `F(t) = Σ_i θ_i √λ_i e_i(t)` on each grid point.
pub fn sequence_to_function(theta: &ParamVector, grid: &FunctionGrid) -> Vec<f64> {
    BasisTable::new(theta.dim(), grid).apply(theta.as_slice())
}

/// Sample quantile of sorted data, linear interpolation between order
/// statistics (`h = (n-1)p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Pointwise band of predictive draws mapped to function space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictiveBand {
    pub lower: Vec<f64>,
    pub mean: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Pointwise central `level` band and mean path of sequence draws.
pub fn predictive_band(samples: &[Vec<f64>], grid: &FunctionGrid, level: f64) -> Result<PredictiveBand> {
    if samples.len() < 10 {
        return Err(Error::InsufficientData {
            needed: 10,
            got: samples.len(),
        });
    }
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("band level must lie in (0, 1), got {level}"));
    }
    let d = samples.iter().map(Vec::len).max().unwrap_or(0);
    let table = BasisTable::new(d, grid);
    let paths: Vec<Vec<f64>> = samples.par_iter().map(|s| table.apply(s)).collect();

    let n = grid.len();
    let p_lo = 0.5 * (1.0 - level);
    let cols: Vec<(f64, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut col: Vec<f64> = paths.iter().map(|p| p[k]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.sort_by(f64::total_cmp);
            (quantile_sorted(&col, p_lo), mean, quantile_sorted(&col, 1.0 - p_lo))
        })
        .collect();
    Ok(PredictiveBand {
        lower: cols.iter().map(|c| c.0).collect(),
        mean: cols.iter().map(|c| c.1).collect(),
        upper: cols.iter().map(|c| c.2).collect(),
    })
}
