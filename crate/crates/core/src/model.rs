//! Shared types for the Gaussian sequence model.
//!
//! The current observation is `X_i = θ_i + ε W_i` and the future observation
//! is `Y_i = θ_i + ε̃ W̃_i`. Infinite sequences are carried as finite
//! truncations; coordinates past the stored length are zero.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Current and future noise scales together with the two derived variances
/// that appear in every risk formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseLevels {
    pub eps: f64,
    pub eps_tilde: f64,
    /// `ε²`
    pub v_eps_sq: f64,
    /// `1 / (1/ε² + 1/ε̃²)`
    pub v_eps_tilde_sq: f64,
}

impl NoiseLevels {
    pub fn new(eps: f64, eps_tilde: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) || !(eps_tilde > 0.0 && eps_tilde.is_finite()) {
            return domain(format!(
                "noise scales must be positive and finite (eps={eps}, eps_tilde={eps_tilde})"
            ));
        }
        let e2 = eps * eps;
        let t2 = eps_tilde * eps_tilde;
        Ok(Self {
            eps,
            eps_tilde,
            v_eps_sq: e2,
            v_eps_tilde_sq: e2 * t2 / (e2 + t2),
        })
    }

    /// Ratio `ε̃ / ε`.
    pub fn gamma(&self) -> f64 {
        self.eps_tilde / self.eps
    }

    pub fn eps_sq(&self) -> f64 {
        self.v_eps_sq
    }

    pub fn eps_tilde_sq(&self) -> f64 {
        self.eps_tilde * self.eps_tilde
    }
}

/// Noise levels with `ε̃ = γ ε`.
pub fn make_noise(eps: f64, gamma: f64) -> Result<NoiseLevels> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return domain(format!("gamma must be positive and finite, got {gamma}"));
    }
    NoiseLevels::new(eps, gamma * eps)
}

/// Shape of the coefficient sequence `a` of an ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EllipsoidKind {
    /// `a_i = i^α`
    Sobolev { alpha: f64 },
    /// `a_i = e^{α i}`
    Exponential { alpha: f64 },
    /// A finite, nondecreasing, positive sequence.
    Explicit { coeffs: Vec<f64> },
}

/// The ellipsoid `Θ(a, B) = {θ : Σ a_i² θ_i² ≤ B}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSpec {
    pub kind: EllipsoidKind,
    pub radius: f64,
}

impl EllipsoidSpec {
    pub fn new(kind: EllipsoidKind, radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return domain(format!("radius must be nonnegative and finite, got {radius}"));
        }
        match &kind {
            EllipsoidKind::Sobolev { alpha } | EllipsoidKind::Exponential { alpha } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return domain(format!("alpha must be positive, got {alpha}"));
                }
            }
            EllipsoidKind::Explicit { coeffs } => {
                if coeffs.is_empty() {
                    return domain("explicit coefficient sequence is empty");
                }
                if coeffs.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
                    return domain("explicit coefficients must be positive and finite");
                }
                if coeffs.windows(2).any(|w| w[1] < w[0]) {
                    return domain("explicit coefficients must be nondecreasing");
                }
            }
        }
        Ok(Self { kind, radius })
    }

    pub fn sobolev(alpha: f64, radius: f64) -> Result<Self> {
        Self::new(EllipsoidKind::Sobolev { alpha }, radius)
    }

    pub fn exponential(alpha: f64, radius: f64) -> Result<Self> {
        Self::new(EllipsoidKind::Exponential { alpha }, radius)
    }

    pub fn explicit(coeffs: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(EllipsoidKind::Explicit { coeffs }, radius)
    }

    /// `a_i` for a 1-based index.
    pub fn coeff(&self, i: usize) -> Result<f64> {
        if i == 0 {
            return domain("coefficient index is 1-based");
        }
        Ok(match &self.kind {
            EllipsoidKind::Sobolev { alpha } => (i as f64).powf(*alpha),
            EllipsoidKind::Exponential { alpha } => (alpha * i as f64).exp(),
            EllipsoidKind::Explicit { coeffs } => *coeffs.get(i - 1).ok_or(Error::OutOfRange {
                index: i,
                len: coeffs.len(),
            })?,
        })
    }

    /// `a_i²`, computed without squaring an intermediate power.
    pub fn coeff_sq(&self, i: usize) -> Result<f64> {
        match &self.kind {
            EllipsoidKind::Sobolev { alpha } if i > 0 => Ok((i as f64).powf(2.0 * alpha)),
            EllipsoidKind::Exponential { alpha } if i > 0 => Ok((2.0 * alpha * i as f64).exp()),
            _ => self.coeff(i).map(|a| a * a),
        }
    }

    /// Number of stored coefficients, or `None` for generated sequences.
    pub fn stored_len(&self) -> Option<usize> {
        match &self.kind {
            EllipsoidKind::Explicit { coeffs } => Some(coeffs.len()),
            _ => None,
        }
    }
}

/// `a_i` of an ellipsoid.
pub fn ellipsoid_coeff(spec: &EllipsoidSpec, i: usize) -> Result<f64> {
    spec.coeff(i)
}

/// A truncation `θ^{(d)} = (θ_1, …, θ_d)` of a square-summable sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return domain("parameter vector must have d >= 1");
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return domain("parameter vector entries must be finite");
        }
        Ok(Self(theta))
    }

    pub fn zeros(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    /// `θ_i = i^{-power}` for `i = 1..=d`.
    pub fn poly_decay(power: f64, d: usize) -> Result<Self> {
        Self::new((1..=d).map(|i| (i as f64).powf(-power)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|t| t * t).sum()
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// `Σ_{i≤d} a_i² θ_i²`; `θ` lies in `Θ(a, B)` iff the value is at most `B`.
///
/// Zero entries never touch the coefficient sequence, so an explicit
/// sequence only needs to cover the support of `θ`.
pub fn ellipsoid_norm(theta: &ParamVector, spec: &EllipsoidSpec) -> Result<f64> {
    let mut acc = 0.0;
    for (k, &t) in theta.as_slice().iter().enumerate() {
        if t != 0.0 {
            acc += spec.coeff_sq(k + 1)? * t * t;
        }
    }
    Ok(acc)
}
