//! Exact sampling from the Gamma law truncated to `(0, 1]`.
//!
//! Density `∝ κ^{a-1} e^{-bκ}` on `(0, 1]`. Writing
//! `e^{-bκ} = e^{-b} Σ_k b^k (1-κ)^k / k!` shows the law is a countable
//! mixture of `Beta(a, k+1)` laws. Keeping the first `N` terms gives a
//! proposal that is dominated by the target up to the constant
//! `1 / P(Poisson(b) < N)`, so accept–reject with that proposal is exact
//! (Philippe's mixture method). When the untruncated `Gamma(a, b)` already
//! puts most of its mass on `(0, 1]` we instead draw from it and reject
//! values above one.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{domain, Result};

#[derive(Debug, Clone)]
enum Repr {
    /// `b = 0`: the law of `U^{1/a}`.
    Power,
    /// Draw `Gamma(a, b)` and reject values above 1.
    Reject(Gamma<f64>),
    BetaMixture {
        /// Cumulative, unnormalised component weights.
        cumulative: Vec<f64>,
        /// `P(Poisson(b) < N)`, the acceptance numerator.
        cdf_at_rate: f64,
    },
}

/// Gamma(shape, rate) truncated to `(0, 1]`.
#[derive(Debug, Clone)]
pub struct TruncatedGamma {
    shape: f64,
    rate: f64,
    repr: Repr,
}

/// `P(Poisson(y) ≤ n - 1)`.
fn poisson_cdf_below(n: usize, y: f64) -> f64 {
    if y <= 0.0 {
        1.0
    } else {
        gamma_ur(n as f64, y)
    }
}

impl TruncatedGamma {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && shape.is_finite()) {
            return domain(format!("truncated gamma shape must be positive, got {shape}"));
        }
        if !(rate >= 0.0 && rate.is_finite()) {
            return domain(format!("truncated gamma rate must be nonnegative, got {rate}"));
        }
        let repr = if rate == 0.0 {
            Repr::Power
        } else if gamma_lr(shape, rate) >= 0.5 {
            Repr::Reject(Gamma::new(shape, 1.0 / rate).expect("validated parameters"))
        } else {
            let n = (rate + 3.0 * rate.sqrt()).ceil() as usize + 2;
            // w_k ∝ b^k / (a (a+1) ⋯ (a+k)), built in log space.
            let mut logw = Vec::with_capacity(n);
            let mut acc = -shape.ln();
            logw.push(acc);
            for k in 1..n {
                acc += rate.ln() - (shape + k as f64).ln();
                logw.push(acc);
            }
            let top = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            let cumulative = logw
                .iter()
                .map(|lw| {
                    total += (lw - top).exp();
                    total
                })
                .collect();
            Repr::BetaMixture {
                cumulative,
                cdf_at_rate: poisson_cdf_below(n, rate),
            }
        };
        Ok(Self { shape, rate, repr })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// One exact draw together with the number of proposals it took.
    pub fn sample_with_tries<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let mut tries = 0;
        loop {
            tries += 1;
            let candidate = match &self.repr {
                Repr::Power => rng.random::<f64>().powf(1.0 / self.shape),
                Repr::Reject(g) => {
                    let v = g.sample(rng);
                    if v > 1.0 {
                        continue;
                    }
                    v
                }
                Repr::BetaMixture {
                    cumulative,
                    cdf_at_rate,
                } => {
                    let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                    let k = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
                    let beta = Beta::new(self.shape, k as f64 + 1.0).expect("positive parameters");
                    let v: f64 = beta.sample(rng);
                    let accept = cdf_at_rate / poisson_cdf_below(cumulative.len(), self.rate * (1.0 - v));
                    if rng.random::<f64>() > accept {
                        continue;
                    }
                    v
                }
            };
            if candidate > 0.0 && candidate <= 1.0 {
                return (candidate, tries);
            }
        }
    }
}

impl Distribution<f64> for TruncatedGamma {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_with_tries(rng).0
    }
}

/// Draw from the Gamma(shape, rate) law truncated to `(0, 1]`.
pub fn truncated_gamma_sample<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    Ok(TruncatedGamma::new(shape, rate)?.sample(rng))
}
