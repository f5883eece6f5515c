//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Value and error estimate of a definite integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Absolute/relative stopping rule: stop once `error <= max(abs, rel·|value|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-10,
            max_intervals: 2000,
        }
    }
}

impl Tolerance {
    pub fn abs(abs: f64) -> Self {
        Self {
            abs,
            rel: 0.0,
            ..Self::default()
        }
    }

    pub fn rel(rel: f64) -> Self {
        Self {
            abs: 0.0,
            rel,
            ..Self::default()
        }
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrate `f` over `[points[0], points[last]]`, using every entry of
/// `points` as an initial breakpoint. `points` must be increasing.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    tol: Tolerance,
    op: &'static str,
) -> Result<Integral> {
    assert!(points.len() >= 2, "need at least one interval");
    let mut heap = BinaryHeap::new();
    let (mut value, mut error) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk15(&f, w[0], w[1]);
        value += v;
        error += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
        });
    }
    while error > tol.abs.max(tol.rel * value.abs()) {
        if !value.is_finite() || heap.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                op,
                achieved: error,
                requested: tol.abs.max(tol.rel * value.abs()),
            });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                op,
                achieved: error,
                requested: tol.abs.max(tol.rel * value.abs()),
            });
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        value += v1 + v2 - worst.value;
        error += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed drift from the running updates.
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(Integral { value, error })
}

pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
    op: &'static str,
) -> Result<Integral> {
    integrate_with_breaks(f, &[a, b], tol, op)
}

/// `ln ∫_lo^hi exp(g(z)) dz` for a log-integrand `g` that may be sharply
/// peaked. The peak is located on a uniform scan, refined by golden-section
/// search, and the integral of `exp(g - max)` is taken over the region where
/// `g` is within `WINDOW` nats of its maximum.
pub fn log_integrate_exp<G: Fn(f64) -> f64>(
    g: G,
    lo: f64,
    hi: f64,
    scan_points: usize,
    rel_tol: f64,
    op: &'static str,
) -> Result<f64> {
    const WINDOW: f64 = 50.0;
    let n = scan_points.max(3);
    let step = (hi - lo) / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|k| lo + step * k as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&z| g(z)).collect();
    let (kmax, &gmax) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    if gmax == f64::NEG_INFINITY {
        return Ok(f64::NEG_INFINITY);
    }

    // Golden-section refinement of the peak inside the neighbouring cells.
    let (mut a, mut b) = (grid[kmax.saturating_sub(1)], grid[(kmax + 1).min(n - 1)]);
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..40 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - ratio * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + ratio * (b - a);
            gd = g(d);
        }
    }
    let (zpeak, gpeak) = if gc > gd { (c, gc) } else { (d, gd) };
    let shift = gmax.max(gpeak);

    let keep = |k: usize| vals[k] > shift - WINDOW;
    let first = (0..n).find(|&k| keep(k)).unwrap_or(kmax);
    let last = (0..n).rev().find(|&k| keep(k)).unwrap_or(kmax);
    let first = first.saturating_sub(1);
    let last = (last + 1).min(n - 1);

    let span = last - first;
    let stride = (span / 24).max(1);
    let mut breaks: Vec<f64> = (first..=last).step_by(stride).map(|k| grid[k]).collect();
    if *breaks.last().unwrap() < grid[last] {
        breaks.push(grid[last]);
    }
    if zpeak > breaks[0] && zpeak < grid[last] {
        breaks.push(zpeak);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
    }

    let tol = Tolerance {
        abs: 0.0,
        rel: rel_tol,
        max_intervals: 4000,
    };
    let res = integrate_with_breaks(|z| (g(z) - shift).exp(), &breaks, tol, op)?;
    Ok(shift + res.value.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, Tolerance::default(), "t").unwrap();
        assert_relative_eq!(r.value, 64.0 / 6.0 - 8.0, max_relative = 1e-14);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::abs(1e-10), "t").unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-9);
    }

    #[test]
    fn gaussian_peak_in_log_space() {
        // ∫ exp(-(z-3)²/(2·0.01²)) dz over [-200, 10] = 0.01·√(2π)
        let got = log_integrate_exp(
            |z| -(z - 3.0) * (z - 3.0) / (2.0 * 1e-4),
            -200.0,
            10.0,
            241,
            1e-12,
            "t",
        )
        .unwrap();
        assert_relative_eq!(got, (0.01 * (2.0 * std::f64::consts::PI).sqrt()).ln(), epsilon = 1e-10);
    }

    #[test]
    fn reports_failure() {
        let tol = Tolerance {
            abs: 1e-14,
            rel: 0.0,
            max_intervals: 4,
        };
        let err = integrate(|x: f64| (1.0 / x).sin(), 1e-9, 1.0, tol, "osc").unwrap_err();
        assert!(matches!(err, Error::Quadrature { op: "osc", .. }));
    }
}
