//! Gaussian-prior predictive distributions on an ellipsoid.
//!
//! The least favourable Gaussian prior `N(0, τ*_i²)` is found by water-filling:
//! a Lagrange multiplier `λ` fixes the variances
//!
//! ```text
//! τ*_i² = ½ [ (v² - v̄²) √(1 + 4 / (2 λ a_i² (v² - v̄²))) - (v² + v̄²) ]₊
//! ```
//!
//! with `v² = ε²`, `v̄² = 1/(1/ε² + 1/ε̃²)`, and `λ` solves `Σ a_i² τ*_i² = B`.
//! Only the first `T` variances are positive, where `T` is the largest index
//! with `1 / (λ a_i²) > 2 ε̃²`.

use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{EllipsoidSpec, NoiseLevels, ParamVector};
use crate::quadrature::{integrate, Tolerance};

/// Solution of the water-filling problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaterfillSolution {
    /// Lagrange multiplier; `+∞` for the degenerate radius `B = 0`.
    pub lambda: f64,
    /// `τ*_i²` for `i = 1..=T`; every later variance is zero.
    pub tau_sq: Vec<f64>,
    pub truncation: usize,
    pub minimax_risk: f64,
    /// `Σ a_i² τ*_i² - B` at the returned multiplier.
    pub constraint_residual: f64,
}

impl WaterfillSolution {
    /// Prior variances zero-padded (or cut) to length `d`.
    pub fn tau_sq_padded(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        let n = d.min(self.tau_sq.len());
        out[..n].copy_from_slice(&self.tau_sq[..n]);
        out
    }

    /// The least favourable parameter `θ_i = τ*_i`.
    pub fn least_favorable(&self) -> Result<ParamVector> {
        if self.tau_sq.is_empty() {
            return ParamVector::zeros(1);
        }
        ParamVector::new(self.tau_sq.iter().map(|t| t.sqrt()).collect())
    }
}

fn tau_sq_at(lambda: f64, a_sq: f64, noise: &NoiseLevels) -> f64 {
    let v = noise.v_eps_sq;
    let vbar = noise.v_eps_tilde_sq;
    // v - v̄ = ε⁴ / (ε² + ε̃²), formed without cancellation.
    let gap = v * v / (v + noise.eps_tilde_sq());
    let inner = gap * (1.0 + 2.0 / (lambda * a_sq * gap)).sqrt() - (v + vbar);
    0.5 * inner.max(0.0)
}

/// Largest `i` with `a_i² < threshold`, by doubling then bisection.
fn active_count(spec: &EllipsoidSpec, threshold: f64) -> Result<usize> {
    if spec.coeff_sq(1)? >= threshold {
        return Ok(0);
    }
    if let Some(len) = spec.stored_len() {
        if spec.coeff_sq(len)? < threshold {
            return Err(Error::OutOfRange {
                index: len + 1,
                len,
            });
        }
    }
    let mut lo = 1usize;
    let mut hi = 2usize;
    loop {
        let beyond = match spec.stored_len() {
            Some(len) if hi > len => true,
            _ => spec.coeff_sq(hi)? >= threshold,
        };
        if beyond {
            break;
        }
        lo = hi;
        hi = hi.checked_mul(2).ok_or_else(|| {
            Error::Domain("coefficient sequence does not diverge fast enough".into())
        })?;
    }
    // a_lo² < threshold, and index hi is past the active set.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if spec.coeff_sq(mid)? < threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Solve the water-filling problem for `Θ(a, B)` at the given noise levels.
pub fn solve_waterfill(spec: &EllipsoidSpec, noise: &NoiseLevels) -> Result<WaterfillSolution> {
    const OP: &str = "solve_waterfill";
    let budget = spec.radius;
    if budget == 0.0 {
        return Ok(WaterfillSolution {
            lambda: f64::INFINITY,
            tau_sq: Vec::new(),
            truncation: 0,
            minimax_risk: 0.0,
            constraint_residual: 0.0,
        });
    }
    let t2 = noise.eps_tilde_sq();
    let threshold = |lambda: f64| 1.0 / (2.0 * lambda * t2);

    // λ at which the first coordinate switches on; the constraint is zero there.
    let lambda_hi = threshold(1.0) / spec.coeff_sq(1)?;
    let mut hi = lambda_hi;
    let mut lo = lambda_hi;
    let mut cache: Vec<f64> = Vec::new();
    let constraint = |lambda: f64, cache: &mut Vec<f64>| -> Result<f64> {
        let t = active_count(spec, threshold(lambda))?;
        while cache.len() < t {
            cache.push(spec.coeff_sq(cache.len() + 1)?);
        }
        Ok(cache[..t]
            .iter()
            .map(|&a2| a2 * tau_sq_at(lambda, a2, noise))
            .sum())
    };

    let mut expansions = 0;
    loop {
        lo *= 0.25;
        if constraint(lo, &mut cache)? > budget {
            break;
        }
        hi = lo;
        expansions += 1;
        if expansions > 2000 || lo == 0.0 {
            return Err(Error::Solver {
                op: OP,
                lo,
                hi,
                residual: f64::NAN,
            });
        }
    }

    let tol = 1e-12 * budget;
    let mut lambda = (lo * hi).sqrt();
    let mut residual = constraint(lambda, &mut cache)? - budget;
    for _ in 0..400 {
        if residual.abs() <= tol {
            break;
        }
        if residual > 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let next = (lo * hi).sqrt();
        if next <= lo || next >= hi {
            break;
        }
        lambda = next;
        residual = constraint(lambda, &mut cache)? - budget;
    }
    if residual.abs() > 1e-10 * budget.max(1.0) {
        return Err(Error::Solver {
            op: OP,
            lo,
            hi,
            residual,
        });
    }

    let truncation = active_count(spec, threshold(lambda))?;
    let tau_sq: Vec<f64> = (1..=truncation)
        .map(|i| Ok(tau_sq_at(lambda, spec.coeff_sq(i)?, noise)))
        .collect::<Result<_>>()?;
    let minimax_risk = tau_sq
        .iter()
        .map(|&t| log_ratio_term(t, noise))
        .sum();
    Ok(WaterfillSolution {
        lambda,
        tau_sq,
        truncation,
        minimax_risk,
        constraint_residual: residual,
    })
}

/// `½ ln((1 + t/v̄²) / (1 + t/v²))`
fn log_ratio_term(t: f64, noise: &NoiseLevels) -> f64 {
    0.5 * ((t / noise.v_eps_tilde_sq).ln_1p() - (t / noise.v_eps_sq).ln_1p())
}

/// Posterior `G_τ(·|X)`: coordinate-wise means and variances.
pub fn gaussian_posterior(
    tau_sq: &[f64],
    x: &[f64],
    noise: &NoiseLevels,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if tau_sq.len() != x.len() {
        return domain(format!(
            "length mismatch: {} prior variances, {} observations",
            tau_sq.len(),
            x.len()
        ));
    }
    if tau_sq.iter().any(|t| !(*t >= 0.0)) {
        return domain("prior variances must be nonnegative");
    }
    let e2 = noise.eps_sq();
    let means = tau_sq
        .iter()
        .zip(x)
        .map(|(&t, &xi)| if t.is_infinite() { xi } else { t / (t + e2) * xi })
        .collect();
    let vars = tau_sq
        .iter()
        .map(|&t| if t.is_infinite() { e2 } else { t * e2 / (t + e2) })
        .collect();
    Ok((means, vars))
}

/// Bayesian predictive distribution under the prior `⊗ N(0, τ_i²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPredictive {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Variance `ε̃²` of every coordinate past the stored length.
    pub tail_variance: f64,
}

pub fn gaussian_predictive(
    tau_sq: &[f64],
    x: &[f64],
    noise: &NoiseLevels,
) -> Result<GaussianPredictive> {
    let (means, post_vars) = gaussian_posterior(tau_sq, x, noise)?;
    let t2 = noise.eps_tilde_sq();
    Ok(GaussianPredictive {
        means,
        variances: post_vars.into_iter().map(|v| v + t2).collect(),
        tail_variance: t2,
    })
}

/// Closed-form KL risk of the Gaussian-prior predictive distribution at `θ`.
/// Vectors are zero-padded to a common length.
pub fn kl_risk_gaussian(theta: &ParamVector, tau_sq: &[f64], noise: &NoiseLevels) -> f64 {
    let th = theta.as_slice();
    let n = th.len().max(tau_sq.len());
    let v = noise.v_eps_sq;
    let vbar = noise.v_eps_tilde_sq;
    (0..n)
        .map(|i| {
            let t = tau_sq.get(i).copied().unwrap_or(0.0);
            let th2 = th.get(i).map_or(0.0, |x| x * x);
            log_ratio_term(t, noise) + 0.5 * (vbar + th2) / (vbar + t) - 0.5 * (v + th2) / (v + t)
        })
        .sum()
}

/// Minimum over `τ` of the Gaussian-prior KL risk, attained at `τ = θ`.
pub fn oracle_risk(theta: &ParamVector, noise: &NoiseLevels) -> f64 {
    theta
        .as_slice()
        .iter()
        .map(|t| log_ratio_term(t * t, noise))
        .sum()
}

fn check_alpha_gamma(alpha: f64, gamma: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite() && gamma > 0.0 && gamma.is_finite()) {
        return domain(format!("alpha and gamma must be positive (alpha={alpha}, gamma={gamma})"));
    }
    Ok(())
}

/// Limit of `(ε²/B)^{1/(2α+1)}` times the minimax KL risk over the Sobolev
/// ellipsoid when `ε̃ = γ ε`.
pub fn sobolev_constant(alpha: f64, gamma: f64) -> Result<f64> {
    const OP: &str = "sobolev_constant";
    check_alpha_gamma(alpha, gamma)?;
    let g2 = gamma * gamma;
    let c = 4.0 * g2 * (g2 + 1.0);
    let tol = Tolerance {
        abs: 1e-12,
        rel: 1e-12,
        max_intervals: 4000,
    };

    // ∫ x^{2α} √(1 + c x^{-2α}) dx written as ∫ x^α √(x^{2α} + c) dx.
    let i1 = integrate(
        |x: f64| x.powf(alpha) * (x.powf(2.0 * alpha) + c).sqrt(),
        0.0,
        1.0,
        tol,
        OP,
    )?
    .value;

    // With y = x^{2α}: √(1 + c/y) - (2γ²+1) = c(1-y) / (√(y² + cy) + (2γ²+1) y).
    let i2 = integrate(
        |x: f64| {
            let y = x.powf(2.0 * alpha);
            let den = (y * y + c * y).sqrt() + (2.0 * g2 + 1.0) * y;
            let q = 2.0 * g2 * (g2 + 1.0) * den / (c * (1.0 - y));
            (1.0 / (g2 + q)).ln_1p()
        },
        0.0,
        1.0,
        tol,
        OP,
    )?
    .value;

    let denom = i1 - (2.0 * g2 + 1.0) / (2.0 * alpha + 1.0);
    Ok(0.5 * (2.0 * (g2 + 1.0) / denom).powf(1.0 / (2.0 * alpha + 1.0)) * i2)
}

/// Pinsker's constant `(2α+1)^{1/(2α+1)} (α/(α+1))^{2α/(2α+1)}`.
pub fn pinsker_constant(alpha: f64) -> f64 {
    let p = 2.0 * alpha + 1.0;
    p.powf(1.0 / p) * (alpha / (alpha + 1.0)).powf(2.0 * alpha / p)
}

/// Asymptotic constant of the best plug-in predictive distribution over the
/// Sobolev ellipsoid: Pinsker's constant times `1/(2γ²)`.
pub fn estimative_constant(alpha: f64, gamma: f64) -> Result<f64> {
    check_alpha_gamma(alpha, gamma)?;
    Ok(pinsker_constant(alpha) / (2.0 * gamma * gamma))
}

/// Leading coefficients of `log(1/ε)` in the minimax risks over the
/// exponential ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialRiskBound {
    /// `log(1 + 1/γ²) / (2α)`, an upper bound for predictive distributions.
    pub predictive_coeff: f64,
    /// `1 / (2γ²α)`, attained by plug-in distributions.
    pub estimative_coeff: f64,
}

pub fn exponential_risk_bound(alpha: f64, gamma: f64) -> Result<ExponentialRiskBound> {
    check_alpha_gamma(alpha, gamma)?;
    Ok(ExponentialRiskBound {
        predictive_coeff: (1.0 / (gamma * gamma)).ln_1p() / (2.0 * alpha),
        estimative_coeff: 1.0 / (2.0 * gamma * gamma * alpha),
    })
}
