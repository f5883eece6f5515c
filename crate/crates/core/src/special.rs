//! Incomplete-gamma quantities for the Gamma law truncated to `(0, 1]`.
//!
//! With shape `s > 0` and rate `r ≥ 0` the unnormalised density is
//! `κ^{s-1} e^{-rκ}`. Its normaliser is `Z(s, r) = γ(s, r) / r^s` where
//! `γ` is the lower incomplete gamma function.

use statrs::function::gamma::ln_gamma;

const MAX_ITER: usize = 100_000;
const EPS: f64 = 1e-17;

/// `Σ_{k≥0} r^k / Π_{m=0}^{k} (a+m)`, convergent for every `r`, fast for `r < a+1`.
fn pochhammer_series(a: f64, r: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    for k in 1..MAX_ITER {
        term *= r / (a + k as f64);
        sum += term;
        if term < sum * EPS {
            break;
        }
    }
    sum
}

/// `ln Γ(s, r)` (upper incomplete gamma) by Lentz's continued fraction; `r ≥ s + 1`.
fn ln_upper_gamma_cf(s: f64, r: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = r + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -r + s * r.ln() + h.ln()
}

/// `ln γ(s, r)` for `r ≥ s + 1`, via `Γ(s) (1 - Q(s, r))`.
fn ln_lower_gamma_large(s: f64, r: f64) -> f64 {
    let lg = ln_gamma(s);
    let q = (ln_upper_gamma_cf(s, r) - lg).exp();
    lg + (-q).ln_1p()
}

/// `ln ∫_0^1 κ^{s-1} e^{-rκ} dκ`.
pub fn ln_truncated_gamma_norm(s: f64, r: f64) -> f64 {
    debug_assert!(s > 0.0 && r >= 0.0);
    if r == 0.0 {
        -s.ln()
    } else if r < s + 1.0 {
        -r + pochhammer_series(s, r).ln()
    } else {
        ln_lower_gamma_large(s, r) - s * r.ln()
    }
}

/// Mean of the Gamma(shape `s`, rate `r`) law truncated to `(0, 1]`,
/// i.e. `γ(s+1, r) / (r γ(s, r))`.
pub fn truncated_gamma_mean(s: f64, r: f64) -> f64 {
    debug_assert!(s > 0.0 && r >= 0.0);
    if r == 0.0 {
        s / (s + 1.0)
    } else if r < s + 1.0 {
        let s1 = pochhammer_series(s + 1.0, r);
        s * s1 / (1.0 + r * s1)
    } else {
        let h = (s * r.ln() - r - ln_lower_gamma_large(s, r)).exp();
        (s - h) / r
    }
}
