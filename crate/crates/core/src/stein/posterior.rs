//! Posterior and predictive distributions under the blockwise Stein prior.
//!
//! On a block of size `b > 2` the prior `‖θ_B‖^{2-b}` is a scale mixture of
//! Gaussians. Conditional on the mixing variable `κ ∈ (0, 1]` the posterior
//! is `N((1-κ) x_B, ε²(1-κ) I)`, and `κ | x_B` follows the Gamma law with
//! shape `b/2 - 1` and rate `‖x_B‖²/(2ε²)` truncated to `(0, 1]`. Blocks of
//! size one or two carry the flat prior.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::blocks::BlockSystem;
use super::truncgamma::TruncatedGamma;
use crate::error::{domain, Result};
use crate::model::{NoiseLevels, ParamVector};
use crate::quadrature::log_integrate_exp;
use crate::special::{ln_truncated_gamma_norm, truncated_gamma_mean};

const SCAN_POINTS: usize = 241;
const DENSITY_REL_TOL: f64 = 1e-10;

/// Posterior of one block.
#[derive(Debug, Clone)]
pub struct BlockPosterior {
    x: Vec<f64>,
    eps: f64,
    /// Present when the block carries a Stein prior (`b > 2`).
    mixing: Option<Mixing>,
}

#[derive(Debug, Clone)]
struct Mixing {
    shape: f64,
    rate: f64,
    ln_norm: f64,
    sampler: TruncatedGamma,
}

impl BlockPosterior {
    /// Posterior for a block; blocks with `b ≤ 2` use the flat prior.
    pub fn new(x_block: &[f64], eps: f64) -> Result<Self> {
        if x_block.is_empty() {
            return domain("empty block");
        }
        if !(eps > 0.0) {
            return domain(format!("eps must be positive, got {eps}"));
        }
        let b = x_block.len();
        let mixing = if b > 2 {
            let shape = b as f64 / 2.0 - 1.0;
            let rate = x_block.iter().map(|v| v * v).sum::<f64>() / (2.0 * eps * eps);
            Some(Mixing {
                shape,
                rate,
                ln_norm: ln_truncated_gamma_norm(shape, rate),
                sampler: TruncatedGamma::new(shape, rate)?,
            })
        } else {
            None
        };
        Ok(Self {
            x: x_block.to_vec(),
            eps,
            mixing,
        })
    }

    /// Posterior for a block that must carry the Stein prior.
    pub fn stein(x_block: &[f64], eps: f64) -> Result<Self> {
        if x_block.len() <= 2 {
            return domain(format!(
                "Stein prior needs block size > 2, got {}",
                x_block.len()
            ));
        }
        Self::new(x_block, eps)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn has_stein_prior(&self) -> bool {
        self.mixing.is_some()
    }

    /// `E[κ | x_B]`, or zero for flat-prior blocks.
    pub fn expected_kappa(&self) -> f64 {
        self.mixing
            .as_ref()
            .map_or(0.0, |m| truncated_gamma_mean(m.shape, m.rate))
    }

    /// Posterior mean `(1 - E[κ | x_B]) x_B`.
    pub fn mean(&self) -> Vec<f64> {
        let f = 1.0 - self.expected_kappa();
        self.x.iter().map(|v| f * v).collect()
    }

    /// Draw `θ_B` into `out`; returns the mixing draw when there is one.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Option<f64> {
        let kappa = self.mixing.as_ref().map(|m| m.sampler.sample(rng));
        let k = kappa.unwrap_or(0.0);
        let sd = self.eps * (1.0 - k).sqrt();
        for (o, &xi) in out.iter_mut().zip(&self.x) {
            let z: f64 = StandardNormal.sample(rng);
            *o = (1.0 - k) * xi + sd * z;
        }
        kappa
    }

    /// Log predictive density of `y_B`.
    pub fn predictive_log_density(&self, y: &[f64], noise: &NoiseLevels) -> Result<f64> {
        if y.len() != self.x.len() {
            return domain("block length mismatch");
        }
        let b = self.x.len() as f64;
        let e2 = self.eps * self.eps;
        let t2 = noise.eps_tilde_sq();
        let Some(m) = &self.mixing else {
            let v = e2 + t2;
            let q: f64 = y.iter().zip(&self.x).map(|(a, c)| (a - c) * (a - c)).sum();
            return Ok(-0.5 * b * (2.0 * PI * v).ln() - q / (2.0 * v));
        };

        // ‖y - (1-κ)x‖² = ‖y-x‖² + 2κ (y-x)·x + κ² ‖x‖²
        let mut dd = 0.0;
        let mut dx = 0.0;
        let mut xx = 0.0;
        for (&yi, &xi) in y.iter().zip(&self.x) {
            let diff = yi - xi;
            dd += diff * diff;
            dx += diff * xi;
            xx += xi * xi;
        }
        let log_normal = |kappa: f64| {
            let v = e2 * (1.0 - kappa) + t2;
            let q = dd + 2.0 * kappa * dx + kappa * kappa * xx;
            -0.5 * b * (2.0 * PI * v).ln() - q / (2.0 * v)
        };
        // Integrate over z = ln κ so the κ^{s-1} endpoint behaviour becomes e^{sz}.
        let s = m.shape;
        let r = m.rate;
        let log_integrand = |z: f64| {
            let kappa = z.exp();
            s * z - r * kappa + log_normal(kappa)
        };
        let lo = -(60.0 / s).max(40.0);
        let body = log_integrate_exp(
            log_integrand,
            lo,
            0.0,
            SCAN_POINTS,
            DENSITY_REL_TOL,
            "blockwise_predictive_density",
        )?;
        // Below `lo` the integrand is e^{sz} times the κ → 0 Gaussian.
        let tail = s * lo - s.ln() + log_normal(0.0);
        let total = body.max(tail) + (-(body - tail).abs()).exp().ln_1p();
        Ok(total - m.ln_norm)
    }
}

/// One posterior draw with its mixing variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinPosteriorDraw {
    pub theta: Vec<f64>,
    /// One entry per Stein block, each in `(0, 1]`.
    pub kappas: Vec<f64>,
}

/// Draw `θ_B` from the Stein posterior of a block with `b > 2`.
pub fn stein_posterior_block<R: Rng + ?Sized>(
    x_block: &[f64],
    eps: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let post = BlockPosterior::stein(x_block, eps)?;
    let mut out = vec![0.0; x_block.len()];
    post.sample_into(rng, &mut out);
    Ok(out)
}

/// Blockwise Stein predictive distribution fitted to an observation.
///
/// Coordinates past `blocks.dim()` are predicted by `N(0, ε̃²)`.
#[derive(Debug, Clone)]
pub struct BlockwiseStein {
    blocks: BlockSystem,
    noise: NoiseLevels,
    posteriors: Vec<BlockPosterior>,
    tail_len: usize,
}

impl BlockwiseStein {
    /// `x` must cover the block system; extra coordinates form the tail.
    pub fn fit(x: &[f64], blocks: &BlockSystem, noise: &NoiseLevels) -> Result<Self> {
        if x.len() < blocks.dim() {
            return domain(format!(
                "observation has {} coordinates, block system needs {}",
                x.len(),
                blocks.dim()
            ));
        }
        let posteriors = blocks
            .ranges()
            .map(|r| BlockPosterior::new(&x[r], noise.eps))
            .collect::<Result<_>>()?;
        Ok(Self {
            blocks: blocks.clone(),
            noise: *noise,
            posteriors,
            tail_len: x.len() - blocks.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.blocks.dim() + self.tail_len
    }

    pub fn blocks(&self) -> &BlockSystem {
        &self.blocks
    }

    pub fn posterior_mean(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.posteriors.iter().flat_map(|p| p.mean()).collect();
        out.resize(self.dim(), 0.0);
        out
    }

    /// Coordinate means and approximate variances of the predictive
    /// distribution. Means are exact; variances use `ε²(1 - E[κ]) + ε̃²`,
    /// leaving out the spread of `κ`.
    pub fn gaussian_approximation(&self) -> (Vec<f64>, Vec<f64>) {
        let t2 = self.noise.eps_tilde_sq();
        let e2 = self.noise.eps_sq();
        let mut vars = Vec::with_capacity(self.dim());
        for post in &self.posteriors {
            let v = e2 * (1.0 - post.expected_kappa()) + t2;
            vars.extend(std::iter::repeat_n(v, post.len()));
        }
        vars.resize(self.dim(), t2);
        (self.posterior_mean(), vars)
    }

    pub fn sample_posterior<R: Rng + ?Sized>(&self, rng: &mut R) -> SteinPosteriorDraw {
        let mut theta = vec![0.0; self.dim()];
        let mut kappas = Vec::new();
        for (post, r) in self.posteriors.iter().zip(self.blocks.ranges()) {
            if let Some(k) = post.sample_into(rng, &mut theta[r]) {
                kappas.push(k);
            }
        }
        SteinPosteriorDraw { theta, kappas }
    }

    /// Draw `y` from the predictive distribution.
    pub fn sample_predictive<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut y = self.sample_posterior(rng).theta;
        let sd = self.noise.eps_tilde;
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += sd * z;
        }
        y
    }

    pub fn log_density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return domain(format!(
                "density argument has {} coordinates, expected {}",
                y.len(),
                self.dim()
            ));
        }
        let mut total = 0.0;
        for (post, r) in self.posteriors.iter().zip(self.blocks.ranges()) {
            total += post.predictive_log_density(&y[r], &self.noise)?;
        }
        let t2 = self.noise.eps_tilde_sq();
        for &v in &y[self.blocks.dim()..] {
            total += -0.5 * (2.0 * PI * t2).ln() - v * v / (2.0 * t2);
        }
        Ok(total)
    }
}

/// Posterior mean under the blockwise Stein prior.
pub fn blockwise_posterior_mean(x: &[f64], blocks: &BlockSystem, eps: f64) -> Result<Vec<f64>> {
    if x.len() != blocks.dim() {
        return domain("length of x must equal the block system dimension");
    }
    let mut out = Vec::with_capacity(x.len());
    for r in blocks.ranges() {
        out.extend(BlockPosterior::new(&x[r], eps)?.mean());
    }
    Ok(out)
}

/// One draw of `y` from the blockwise Stein predictive distribution.
pub fn blockwise_stein_predictive_sample<R: Rng + ?Sized>(
    x: &[f64],
    blocks: &BlockSystem,
    noise: &NoiseLevels,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if x.len() != blocks.dim() {
        return domain("length of x must equal the block system dimension");
    }
    Ok(BlockwiseStein::fit(x, blocks, noise)?.sample_predictive(rng))
}

/// Log predictive density of `y` given `x` under the blockwise Stein prior.
pub fn blockwise_predictive_density(
    y: &[f64],
    x: &[f64],
    blocks: &BlockSystem,
    noise: &NoiseLevels,
) -> Result<f64> {
    if x.len() != blocks.dim() || y.len() != x.len() {
        return domain("x and y must both have the block system dimension");
    }
    BlockwiseStein::fit(x, blocks, noise)?.log_density(y)
}

/// Upper bound on the KL risk of the Stein predictive distribution in `ℝ^d`:
/// `log(v²/v̄²) + (d/2) log((1 + (‖θ‖²/d)/v̄²) / (1 + (‖θ‖²/d)/v²))`.
pub fn oracle_bound(theta: &ParamVector, noise: &NoiseLevels) -> Result<f64> {
    let d = theta.dim();
    if d <= 2 {
        return domain(format!("oracle bound needs d > 2, got {d}"));
    }
    let per = theta.norm_sq() / d as f64;
    let v = noise.v_eps_sq;
    let vbar = noise.v_eps_tilde_sq;
    Ok((v / vbar).ln() + 0.5 * d as f64 * ((per / vbar).ln_1p() - (per / v).ln_1p()))
}
