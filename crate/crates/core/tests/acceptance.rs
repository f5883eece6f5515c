//! Acceptance criteria A1 to A9. Runs as a plain binary and prints one
//! PASS/FAIL line per criterion, with indented diagnostics above it.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::gamma_lr;

use seqpred_core::model::{make_noise, EllipsoidSpec, ParamVector};
use seqpred_core::quadrature::{integrate, Tolerance};
use seqpred_core::risk::{adaptivity_ratio, mc_kl_risk, run_tables, ExperimentSetting, Method, SteinMethod};
use seqpred_core::special::ln_truncated_gamma_norm;
use seqpred_core::stein::{
    blockwise_predictive_density, oracle_bound, truncated_gamma_sample, wgb_blocks, wgb_rho, BlockSystem,
    BlockwiseStein,
};
use seqpred_core::waterfill::{
    exponential_risk_bound, kl_risk_gaussian, sobolev_constant, solve_waterfill,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Reference mean-square errors: (Bayes, plugin, Pinsker) per setting.
const TABLE_MSE: [[f64; 3]; 6] = [
    [1.11, 1.11, 1.03],
    [1.89, 1.89, 1.12],
    [8.54, 8.52, 1.85],
    [1.08, 1.08, 1.04],
    [1.89, 1.89, 1.50],
    [21.3, 21.3, 11.0],
];

/// Reference coverage percentages: (Bayes, plugin, Pinsker) per setting.
const TABLE_COVERAGE: [[f64; 3]; 6] = [
    [82.4, 78.6, 79.6],
    [91.1, 71.4, 79.7],
    [98.9, 45.8, 80.2],
    [82.3, 78.4, 79.8],
    [91.6, 71.0, 80.6],
    [97.1, 52.9, 83.5],
];

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// Mean over seeds of (mse, coverage) per setting and method.
fn table_means() -> ([[f64; 3]; 6], [[f64; 3]; 6], f64) {
    let start = Instant::now();
    let settings = ExperimentSetting::all_standard();
    let mut mse = [[0.0; 3]; 6];
    let mut cov = [[0.0; 3]; 6];
    for &seed in &SEEDS {
        let report = run_tables(&settings, seed, 1).expect("tables run");
        for row in &report.mse {
            let k = Method::ALL.iter().position(|m| m.to_string() == row.method).unwrap();
            mse[row.setting as usize - 1][k] += row.mse / SEEDS.len() as f64;
        }
        for row in &report.coverage {
            let k = Method::ALL.iter().position(|m| m.to_string() == row.method).unwrap();
            cov[row.setting as usize - 1][k] += row.coverage_mean_pct / SEEDS.len() as f64;
        }
    }
    (mse, cov, start.elapsed().as_secs_f64())
}

fn a1(mse: &[[f64; 3]; 6], secs: f64) -> Outcome {
    let mut misses = Vec::new();
    for s in 0..6 {
        for k in 0..3 {
            let reference = TABLE_MSE[s][k];
            let tol = if reference <= 2.0 { 0.10 } else { 0.10 * reference };
            let ok = (mse[s][k] - reference).abs() <= tol;
            println!(
                "    A1 setting {} {:<15} mse {:>7.3}  reference {:>5.2}  tol {:.2}  {}",
                s + 1,
                Method::ALL[k].to_string(),
                mse[s][k],
                reference,
                tol,
                if ok { "ok" } else { "MISS" }
            );
            if !ok {
                misses.push(format!("s{}/{}", s + 1, Method::ALL[k]));
            }
        }
    }
    outcome(
        misses.is_empty(),
        format!("{} of 18 cells within tolerance; misses: [{}]; tables ran in {secs:.1}s", 18 - misses.len(), misses.join(", ")),
    )
}

fn a2(cov: &[[f64; 3]; 6]) -> Outcome {
    let mut misses = Vec::new();
    for s in 0..6 {
        for k in 0..3 {
            let reference = TABLE_COVERAGE[s][k];
            let tol = if Method::ALL[k] == Method::Pinsker { 2.0 } else { 3.0 };
            let ok = (cov[s][k] - reference).abs() <= tol;
            println!(
                "    A2 setting {} {:<15} coverage {:>6.2}%  reference {:>5.1}%  tol {:.1}  {}",
                s + 1,
                Method::ALL[k].to_string(),
                cov[s][k],
                reference,
                tol,
                if ok { "ok" } else { "MISS" }
            );
            if !ok {
                misses.push(format!("s{}/{}", s + 1, Method::ALL[k]));
            }
        }
    }
    outcome(
        misses.is_empty(),
        format!("{} of 18 cells within tolerance; misses: [{}]", 18 - misses.len(), misses.join(", ")),
    )
}

fn a3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA3);
    let mut worst_residual: f64 = 0.0;
    let mut worst_saddle: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    for _ in 0..100 {
        let alpha = rng.random_range(0.5..3.0);
        let b = rng.random_range(0.1..10.0);
        let eps = 10f64.powf(rng.random_range(-3.0..0.2f64.log10()));
        let gamma = 10f64.powf(rng.random_range(-1.0..1.0));
        let spec = EllipsoidSpec::sobolev(alpha, b).unwrap();
        let noise = make_noise(eps, gamma).unwrap();
        let sol = solve_waterfill(&spec, &noise).unwrap();

        let budget: f64 = sol.tau_sq.iter().enumerate().map(|(i, t)| ((i + 1) as f64).powf(2.0 * alpha) * t).sum();
        worst_residual = worst_residual.max((budget - b).abs() / b.max(1.0));

        let lf = sol.least_favorable().unwrap();
        let saddle = kl_risk_gaussian(&lf, &sol.tau_sq, &noise);
        worst_saddle = worst_saddle.max((saddle - sol.minimax_risk).abs());

        // random points on the boundary Σ a_i² θ_i² = B
        let k = 2 * sol.truncation + 10;
        for _ in 0..200 {
            let sparse = rng.random_bool(0.3);
            let w: Vec<f64> = (0..k)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut rng);
                    if sparse && rng.random_bool(0.8) { 0.0 } else { e }
                })
                .collect();
            let total: f64 = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
            let theta: Vec<f64> = w
                .iter()
                .enumerate()
                .map(|(i, wi)| {
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    sign * (b * wi / total).sqrt() / ((i + 1) as f64).powf(alpha)
                })
                .collect();
            let risk = kl_risk_gaussian(&ParamVector::new(theta).unwrap(), &sol.tau_sq, &noise);
            worst_excess = worst_excess.max(risk - sol.minimax_risk);
        }
    }
    outcome(
        worst_residual < 1e-10 && worst_saddle < 1e-10 && worst_excess <= 1e-9,
        format!(
            "max scaled residual {worst_residual:.2e}, max saddle gap {worst_saddle:.2e}, max boundary excess {worst_excess:.2e}"
        ),
    )
}

fn a4() -> Outcome {
    let eps: f64 = 1e-4;
    let spec = EllipsoidSpec::sobolev(1.0, 1.0).unwrap();
    let noise = make_noise(eps, 1.0).unwrap();
    let risk = solve_waterfill(&spec, &noise).unwrap().minimax_risk;
    let ratio = risk * (eps * eps).powf(1.0 / 3.0) / sobolev_constant(1.0, 1.0).unwrap();
    outcome((0.95..=1.05).contains(&ratio), format!("ratio {ratio:.5} at eps = 1e-4"))
}

fn a5() -> Outcome {
    let start = Instant::now();
    let noise = make_noise(1.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let mut worst_z = f64::NEG_INFINITY;
    let mut failures = 0;
    for case in 0..50 {
        let d = [3, 10, 50][case % 3];
        let scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let theta: Vec<f64> = (0..d).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let theta = ParamVector::new(theta).unwrap();
        let method = SteinMethod::new(BlockSystem::single(d).unwrap());
        let (risk, se) = mc_kl_risk(&theta, &method, &noise, 2000, &mut rng).unwrap();
        let bound = oracle_bound(&theta, &noise).unwrap();
        let z = (risk - bound) / se;
        worst_z = worst_z.max(z);
        if risk > bound + 3.0 * se {
            failures += 1;
        }
    }
    outcome(
        failures == 0,
        format!(
            "{failures} of 50 exceed bound + 3 se; largest (risk - bound)/se = {worst_z:.2}; {:.1}s",
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Asymptotic 1% critical value of the Kolmogorov distribution.
const KS_CRIT_1PCT: f64 = 1.628;

fn ks_statistic(mut samples: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// CDF of the block-3 predictive projected on unit vector `u`, from the
/// mixture representation: `κ` truncated Gamma, then a Gaussian.
fn projected_cdf(t: f64, ux: f64, s: f64, r: f64, e2: f64, t2: f64) -> f64 {
    let ln_z = ln_truncated_gamma_norm(s, r);
    let normal = Normal::standard();
    // κ = w^{1/s} turns κ^{s-1} dκ into dw / s
    let f = |w: f64| {
        let kappa = w.powf(1.0 / s);
        let v = e2 * (1.0 - kappa) + t2;
        normal.cdf((t - (1.0 - kappa) * ux) / v.sqrt()) * (-r * kappa - ln_z).exp() / s
    };
    integrate(f, 0.0, 1.0, Tolerance::abs(1e-11), "projected_cdf").unwrap().value
}

fn a6() -> Outcome {
    let n = 100_000;
    let crit = KS_CRIT_1PCT / (n as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA6);
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    let mut failed = Vec::new();
    for &shape in &[0.5, 1.0, 2.0, 13.5] {
        for &rate in &[0.0, 1.0, 80.0, 1e4] {
            let draws: Vec<f64> = (0..n).map(|_| truncated_gamma_sample(shape, rate, &mut rng).unwrap()).collect();
            let norm = if rate > 0.0 { gamma_lr(shape, rate) } else { 1.0 };
            let cdf = |x: f64| {
                if rate > 0.0 {
                    gamma_lr(shape, rate * x.min(1.0)) / norm
                } else {
                    x.powf(shape)
                }
            };
            let stat = ks_statistic(draws, cdf);
            worst = worst.max(stat / crit);
            lines.push(format!("({shape}, {rate}) D={stat:.5}"));
            if stat > crit {
                failed.push(format!("({shape}, {rate})"));
            }
        }
    }
    println!("    A6 KS critical value {crit:.5}; {}", lines.join(" "));

    // Block of size 3: sampler projections against the mixture CDF.
    let noise = make_noise(1.0, 0.7).unwrap();
    let x = vec![1.2, -0.6, 0.9];
    let blocks = BlockSystem::single(3).unwrap();
    let fitted = BlockwiseStein::fit(&x, &blocks, &noise).unwrap();
    let ys: Vec<Vec<f64>> = (0..n).map(|_| fitted.sample_predictive(&mut rng)).collect();
    let xx: f64 = x.iter().map(|v| v * v).sum();
    let (s, r) = (0.5, xx / (2.0 * noise.eps_sq()));
    let x_dir: Vec<f64> = x.iter().map(|v| v / xx.sqrt()).collect();
    let diag = vec![1.0 / 3f64.sqrt(); 3];
    for (name, u) in [("e1", vec![1.0, 0.0, 0.0]), ("x/|x|", x_dir), ("diag", diag)] {
        let ux: f64 = u.iter().zip(&x).map(|(a, b)| a * b).sum();
        let proj: Vec<f64> = ys.iter().map(|y| y.iter().zip(&u).map(|(a, b)| a * b).sum()).collect();
        let stat = ks_statistic(proj, |t| projected_cdf(t, ux, s, r, noise.eps_sq(), noise.eps_tilde_sq()));
        println!("    A6 projection {name}: D={stat:.5}");
        worst = worst.max(stat / crit);
        if stat > crit {
            failed.push(format!("projection {name}"));
        }
    }

    // Sampler against the density: E[g(Y)/q(Y)] = 1 for a Gaussian g.
    let g_var = 1.2;
    let ratios: Vec<f64> = ys
        .iter()
        .map(|y| {
            let log_g: f64 = y
                .iter()
                .zip(&x)
                .map(|(a, b)| -0.5 * (2.0 * PI * g_var).ln() - (a - b) * (a - b) / (2.0 * g_var))
                .sum();
            (log_g - blockwise_predictive_density(y, &x, &blocks, &noise).unwrap()).exp()
        })
        .collect();
    let m = ratios.iter().sum::<f64>() / n as f64;
    let sd = (ratios.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
    let z = (m - 1.0) / (sd / (n as f64).sqrt());
    println!("    A6 density identity: mean weight {m:.5}, z = {z:.2}");
    if z.abs() > 2.576 {
        failed.push("density identity".into());
    }

    outcome(
        failed.is_empty(),
        format!(
            "16 KS tests, 3 projections and the density identity; largest D/crit {worst:.3}; failed: [{}]",
            failed.join(", ")
        ),
    )
}

fn a7() -> Outcome {
    let mut problems = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for k in 0..40 {
        // log-grid strictly inside (1e-3, 0.1)
        let eps = 10f64.powf(-3.0 + 2.0 * (k as f64 + 0.5) / 40.0);
        let bs = wgb_blocks(eps).unwrap();
        let mut next = 0;
        for r in bs.ranges() {
            if r.start != next || r.is_empty() {
                problems.push(format!("eps={eps:.4e} not a partition"));
            }
            next = r.end;
        }
        if next != bs.dim() {
            problems.push(format!("eps={eps:.4e} does not cover 1..d"));
        }
        let bound = 1.0 + 3.0 * wgb_rho(eps).unwrap();
        if let Some(ratio) = bs.max_growth_ratio() {
            worst_margin = worst_margin.min(bound - ratio);
            if ratio > bound {
                problems.push(format!("eps={eps:.4e} ratio {ratio:.3} > {bound:.3}"));
            }
        }
    }
    let bs = wgb_blocks(0.05).unwrap();
    let expected = [3, 4, 5, 7, 9, 12, 16, 22, 30, 40, 53, 71, 95];
    let prefix = &bs.cardinalities()[..bs.len() - 1];
    if prefix != expected {
        problems.push(format!("eps=0.05 cardinalities {:?}", bs.cardinalities()));
    }
    outcome(
        problems.is_empty(),
        format!(
            "40 grid points; smallest slack in the ratio bound {worst_margin:.3}; eps=0.05 blocks {:?}; problems: [{}]",
            bs.cardinalities(),
            problems.join(", ")
        ),
    )
}

fn a8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xA8);
    let points = adaptivity_ratio(1.0, 1.0, 1.0, &[0.1, 0.05, 0.025], 2000, &mut rng).unwrap();
    for p in &points {
        let cells: Vec<String> = p
            .probes
            .iter()
            .map(|q| format!("{} {:.3}±{:.3}", q.probe, q.ratio, q.ratio_se))
            .collect();
        println!("    A8 eps={} d={} minimax {:.5}: {}", p.eps, p.d, p.minimax_risk, cells.join(", "));
    }
    let sup: Vec<(f64, f64)> = points.iter().map(|p| (p.sup_ratio().ratio, p.sup_ratio().ratio_se)).collect();
    let mut ok = true;
    for w in sup.windows(2) {
        let slack = 3.0 * (w[0].1 * w[0].1 + w[1].1 * w[1].1).sqrt();
        ok &= w[1].0 <= w[0].0 + slack;
    }
    // the least favourable probe cannot beat the minimax risk
    for p in &points {
        let lf = p.probe("least_favorable").unwrap();
        ok &= lf.ratio >= 1.0 - 3.0 * lf.ratio_se;
    }
    let seq: Vec<String> = sup.iter().map(|(r, se)| format!("{r:.3}±{se:.3}")).collect();
    outcome(
        ok,
        format!("sup ratios over eps {{0.1, 0.05, 0.025}}: {}; {:.1}s", seq.join(" → "), start.elapsed().as_secs_f64()),
    )
}

fn a9() -> Outcome {
    let eps: f64 = 1e-4;
    let mut coeff_fail = 0;
    let mut risk_fail = 0;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..20 {
        let alpha = 0.5 + 2.5 * i as f64 / 19.0;
        for j in 0..20 {
            let gamma = 10f64.powf(-1.0 + 2.0 * j as f64 / 19.0);
            let bound = exponential_risk_bound(alpha, gamma).unwrap();
            if !(bound.predictive_coeff < bound.estimative_coeff) {
                coeff_fail += 1;
            }
            let spec = EllipsoidSpec::exponential(alpha, 1.0).unwrap();
            let noise = make_noise(eps, gamma).unwrap();
            let risk = solve_waterfill(&spec, &noise).unwrap().minimax_risk;
            let scaled = risk / (1.0 / eps).ln() / bound.estimative_coeff;
            worst = worst.max(scaled);
            if scaled >= 1.05 {
                risk_fail += 1;
            }
        }
    }
    outcome(
        coeff_fail == 0 && risk_fail == 0,
        format!(
            "400 grid points; coefficient order violations {coeff_fail}; largest risk/(log(1/eps) estimative_coeff) {worst:.4}"
        ),
    )
}

fn main() -> ExitCode {
    let (mse, cov, secs) = table_means();
    let results: Vec<(&str, &str, Outcome)> = vec![
        ("A1", "mean-square error table", a1(&mse, secs)),
        ("A2", "coverage table", a2(&cov)),
        ("A3", "water-filling exactness", a3()),
        ("A4", "Sobolev risk scaling", a4()),
        ("A5", "oracle inequality", a5()),
        ("A6", "sampler exactness", a6()),
        ("A7", "weakly geometric blocks", a7()),
        ("A8", "adaptivity trend", a8()),
        ("A9", "exponential ellipsoid", a9()),
    ];
    let mut failed = 0;
    for (id, name, o) in &results {
        println!("{id} {:<26} {}  {}", name, if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
