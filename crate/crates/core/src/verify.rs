//! Property checks run by `seqpred verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::gamma_lr;

use crate::error::Result;
use crate::function_view::{sequence_to_function, sqrt_eigenvalue, FunctionGrid};
use crate::model::{make_noise, EllipsoidSpec, ParamVector};
use crate::risk::{mc_kl_risk, run_tables, ExperimentSetting, GaussianPriorMethod, Method, SteinMethod};
use crate::stein::{
    blockwise_predictive_density, oracle_bound, truncated_gamma_sample, wgb_blocks, wgb_rho, BlockSystem,
    BlockwiseStein,
};
use crate::waterfill::{kl_risk_gaussian, solve_waterfill};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the KS distance for large `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn noise_invariants(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let eps = 10f64.powf(rng.random_range(-4.0..1.0));
        let gamma = 10f64.powf(rng.random_range(-2.0..2.0));
        let n = make_noise(eps, gamma)?;
        let direct = n.eps_sq() * n.eps_tilde_sq() / (n.eps_sq() + n.eps_tilde_sq());
        worst = worst.max((n.v_eps_tilde_sq - direct).abs() / direct);
        if !(n.v_eps_tilde_sq < n.v_eps_sq) {
            return Ok((false, format!("harmonic variance not below eps² at eps={eps}, gamma={gamma}")));
        }
    }
    Ok((worst < 1e-14, format!("max relative error {worst:.1e} over 200 draws")))
}

fn waterfill_checks(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let (mut res, mut saddle, mut excess) = (0f64, 0f64, f64::NEG_INFINITY);
    for _ in 0..30 {
        let alpha = rng.random_range(0.5..3.0);
        let b = rng.random_range(0.1..10.0);
        let eps = 10f64.powf(rng.random_range(-3.0..0.2f64.log10()));
        let gamma = 10f64.powf(rng.random_range(-1.0..1.0));
        let spec = EllipsoidSpec::sobolev(alpha, b)?;
        let noise = make_noise(eps, gamma)?;
        let sol = solve_waterfill(&spec, &noise)?;
        res = res.max(sol.constraint_residual.abs() / b.max(1.0));
        saddle = saddle.max((kl_risk_gaussian(&sol.least_favorable()?, &sol.tau_sq, &noise) - sol.minimax_risk).abs());
        let k = 2 * sol.truncation + 5;
        for _ in 0..50 {
            let w: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
            let total: f64 = w.iter().sum();
            let theta = w
                .iter()
                .enumerate()
                .map(|(i, wi)| (b * wi / total).sqrt() / ((i + 1) as f64).powf(alpha))
                .collect();
            let risk = kl_risk_gaussian(&ParamVector::new(theta)?, &sol.tau_sq, &noise);
            excess = excess.max(risk - sol.minimax_risk);
        }
    }
    Ok((
        res < 1e-10 && saddle < 1e-10 && excess <= 1e-9,
        format!("residual {res:.1e}, saddle gap {saddle:.1e}, boundary excess {excess:.1e}"),
    ))
}

fn block_checks() -> Result<(bool, String)> {
    let mut ok = true;
    for k in 0..40 {
        let eps = 10f64.powf(-3.0 + 2.0 * (k as f64 + 0.5) / 40.0);
        let bs = wgb_blocks(eps)?;
        ok &= bs.cardinalities().iter().sum::<usize>() == bs.dim();
        if let Some(r) = bs.max_growth_ratio() {
            ok &= r <= 1.0 + 3.0 * wgb_rho(eps)?;
        }
    }
    Ok((ok, "partition and growth bound on 40 values of eps in (1e-3, 0.1)".into()))
}

fn sampler_ks(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let n = 20_000;
    let crit = ks_critical_1pct(n);
    let mut worst: f64 = 0.0;
    for &(shape, rate) in &[(0.5, 0.0), (1.0, 1.0), (2.0, 80.0), (13.5, 1.0)] {
        let draws = (0..n)
            .map(|_| truncated_gamma_sample(shape, rate, rng))
            .collect::<Result<Vec<f64>>>()?;
        let norm = if rate > 0.0 { gamma_lr(shape, rate) } else { 1.0 };
        let d = ks_statistic(&draws, |x| {
            if rate > 0.0 {
                gamma_lr(shape, rate * x) / norm
            } else {
                x.powf(shape)
            }
        });
        worst = worst.max(d / crit);
    }
    Ok((worst < 1.0, format!("largest KS distance / 1% critical value {worst:.3}")))
}

fn density_identity(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    // E[g(Y)/q(Y)] = 1 for Y drawn from q and any density g
    let noise = make_noise(1.0, 0.7)?;
    let x = [1.2, -0.6, 0.9];
    let blocks = BlockSystem::single(3)?;
    let fitted = BlockwiseStein::fit(&x, &blocks, &noise)?;
    let n = 20_000;
    let g_var = 1.2;
    let mut w = Vec::with_capacity(n);
    for _ in 0..n {
        let y = fitted.sample_predictive(rng);
        let log_g: f64 = y
            .iter()
            .zip(&x)
            .map(|(a, b)| -0.5 * (2.0 * PI * g_var).ln() - (a - b) * (a - b) / (2.0 * g_var))
            .sum();
        w.push((log_g - blockwise_predictive_density(&y, &x, &blocks, &noise)?).exp());
    }
    let m = w.iter().sum::<f64>() / n as f64;
    let sd = (w.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let z = (m - 1.0) / (sd / (n as f64).sqrt());
    Ok((z.abs() < 2.576, format!("mean importance weight {m:.4}, z = {z:.2}")))
}

fn gaussian_kl_agreement(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let mut outside = 0;
    for _ in 0..20 {
        let d = rng.random_range(1..8);
        let noise = make_noise(rng.random_range(0.2..2.0), rng.random_range(0.2..3.0))?;
        let theta = ParamVector::new((0..d).map(|_| rng.random_range(-2.0..2.0)).collect())?;
        let tau: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..4.0)).collect();
        let (est, se) = mc_kl_risk(&theta, &GaussianPriorMethod::new("g", tau.clone()), &noise, 1000, rng)?;
        if (est - kl_risk_gaussian(&theta, &tau, &noise)).abs() > 3.0 * se.max(1e-12) {
            outside += 1;
        }
    }
    // 20 draws at the 3-sigma level: one miss is within chance
    Ok((outside <= 1, format!("{outside} of 20 outside 3 standard errors")))
}

fn oracle_inequality(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let noise = make_noise(1.0, 1.0)?;
    let mut failures = 0;
    for case in 0..10 {
        let d = [3, 10, 50][case % 3];
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let theta = ParamVector::new((0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect())?;
        let (risk, se) = mc_kl_risk(&theta, &SteinMethod::new(BlockSystem::single(d)?), &noise, 500, rng)?;
        if risk > oracle_bound(&theta, &noise)? + 3.0 * se {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{failures} of 10 above bound + 3 se")))
}

fn function_view_checks(rng: &mut ChaCha8Rng) -> Result<(bool, String)> {
    let theta = ParamVector::poly_decay(2.0, 60)?;
    let n = 10_000;
    let f = sequence_to_function(&theta, &FunctionGrid::uniform(n)?);
    let h = 1.0 / n as f64;
    let trap = h * (f.iter().map(|v| v * v).sum::<f64>() - 0.5 * f[n - 1] * f[n - 1]);
    let exact: f64 = theta
        .as_slice()
        .iter()
        .enumerate()
        .map(|(i, t)| (t * sqrt_eigenvalue(i + 1)).powi(2))
        .sum();
    let parseval = (trap - exact).abs() / exact;

    let grid = FunctionGrid::uniform(200)?;
    let x: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (a, b) = (1.7, -0.3);
    let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
    let fc = sequence_to_function(&ParamVector::new(combo)?, &grid);
    let fx = sequence_to_function(&ParamVector::new(x)?, &grid);
    let fy = sequence_to_function(&ParamVector::new(y)?, &grid);
    let lin = fc
        .iter()
        .zip(fx.iter().zip(&fy))
        .map(|(c, (p, q))| (c - (a * p + b * q)).abs())
        .fold(0.0, f64::max);
    Ok((
        parseval < 1e-4 && lin < 1e-12,
        format!("Parseval relative error {parseval:.1e}, linearity error {lin:.1e}"),
    ))
}

fn experiment_checks(seed: u64) -> Result<(bool, String)> {
    let settings: Vec<ExperimentSetting> = ExperimentSetting::all_standard()
        .into_iter()
        .map(|s| ExperimentSetting {
            n_predictive: 200,
            n_truth: 1000,
            ..s
        })
        .collect();
    let a = run_tables(&settings, seed, 1)?;
    let b = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| crate::Error::Unsupported(e.to_string()))?
        .install(|| run_tables(&settings, seed, 1))?;
    let reproducible = a.mse == b.mse && a.coverage == b.coverage;
    let pinsker = Method::Pinsker.to_string();
    let low = a
        .mse
        .iter()
        .filter(|r| r.method == pinsker && r.mse < 1.0 - 3.0 * r.mc_se)
        .count();
    let in_range = a.coverage.iter().all(|r| (0.0..=100.0).contains(&r.coverage_mean_pct));
    Ok((
        reproducible && low == 0 && in_range,
        format!("reproducible across pools: {reproducible}; Pinsker settings below 1 - 3 se: {low}"),
    ))
}

/// Run every property check with randomness derived from `seed`.
pub fn run_verification(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![
        check("noise levels", || noise_invariants(&mut rng)),
        check("water-filling", || waterfill_checks(&mut rng)),
        check("weakly geometric blocks", block_checks),
        check("truncated gamma sampler", || sampler_ks(&mut rng)),
        check("predictive density vs sampler", || density_identity(&mut rng)),
        check("Gaussian KL risk", || gaussian_kl_agreement(&mut rng)),
        check("oracle inequality", || oracle_inequality(&mut rng)),
        check("sequence to function", || function_view_checks(&mut rng)),
        check("experiments", || experiment_checks(seed)),
    ]
}
