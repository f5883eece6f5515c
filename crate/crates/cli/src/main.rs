mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use seqpred_core::function_view::FunctionGrid;
use seqpred_core::model::{make_noise, EllipsoidSpec};
use seqpred_core::report::{write_band_csv, write_coverage_csv, write_json, write_mse_csv, RunManifest};
use seqpred_core::risk::{run_bands, run_tables, ExperimentSetting, REFERENCE_DIM};
use seqpred_core::rng::{setting_task, stream};
use seqpred_core::verify::run_verification;
use seqpred_core::waterfill::{
    estimative_constant, exponential_risk_bound, sobolev_constant, solve_waterfill, WaterfillSolution,
};

use config::{pick, ConfigError, Loaded};

#[derive(Parser)]
#[command(name = "seqpred", version, about = "Predictive distributions for Gaussian sequence models")]
struct Cli {
    /// TOML file with top-level keys and one section per command
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for every random stream
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads (0 = one per logical core)
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean-square error and coverage tables
    Tables(TablesArgs),
    /// Solve the water-filling problem and print the solution
    Waterfill(WaterfillArgs),
    /// Asymptotic risk constants over an (alpha, gamma) grid
    Constants(ConstantsArgs),
    /// Pointwise predictive bands in function space
    Bands(BandsArgs),
    /// Run the property checks
    Verify,
}

#[derive(Args)]
struct TablesArgs {
    /// Comma-separated setting ids, 1 to 6
    #[arg(long, value_delimiter = ',')]
    settings: Option<Vec<u32>>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_predictive: Option<usize>,
    #[arg(long)]
    n_truth: Option<usize>,
    /// Observations per setting, averaged
    #[arg(long)]
    replicates: Option<u32>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "radius", alias = "B")]
    radius: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Sobolev,
    Exponential,
}

#[derive(Args)]
struct WaterfillArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long = "radius", alias = "B")]
    radius: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Args)]
struct ConstantsArgs {
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
}

#[derive(Args)]
struct BandsArgs {
    #[arg(long)]
    setting: Option<u32>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n_predictive: Option<usize>,
    /// Central probability of the band
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
}

/// Values shared by every command after merging flags and file.
struct Common {
    seed: u64,
    out: PathBuf,
    workers: usize,
}

fn common(cli: &Cli, loaded: &Loaded) -> Common {
    Common {
        seed: cli.seed.or(loaded.file.seed).unwrap_or(42),
        out: cli.out.clone().or(loaded.file.out.clone()).unwrap_or_else(|| PathBuf::from("results")),
        workers: cli.workers.or(loaded.file.workers).unwrap_or(0),
    }
}

fn version_stamp() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| format!("{} ({})", env!("CARGO_PKG_VERSION"), s.trim()))
        .unwrap_or_else(|| env!("CARGO_PKG_VERSION").to_string())
}

fn prepare_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

fn manifest(
    command: &str,
    c: &Common,
    start: Instant,
    outputs: &[&str],
    parameters: serde_json::Value,
) -> Result<()> {
    let m = RunManifest {
        command: command.into(),
        seed: c.seed,
        version: version_stamp(),
        workers: rayon::current_num_threads(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        parameters,
    };
    write_json(&c.out.join("run-manifest.json"), &m)?;
    Ok(())
}

fn tables(args: &TablesArgs, c: &Common, loaded: &Loaded) -> Result<()> {
    let start = Instant::now();
    let sec = loaded.file.tables.as_ref();
    let s = Some("tables");
    let ids = pick(args.settings.clone(), "--settings", sec.and_then(|t| t.settings.clone()), s, "settings", (1..=6).collect());
    ids.require(
        !ids.value.is_empty() && ids.value.iter().all(|i| (1..=6).contains(i)),
        loaded,
        "setting ids must be between 1 and 6",
    )?;
    let d = pick(args.d, "--d", sec.and_then(|t| t.d), s, "d", REFERENCE_DIM);
    d.require(d.value >= 3, loaded, "d must be at least 3")?;
    let n_pred = pick(args.n_predictive, "--n-predictive", sec.and_then(|t| t.n_predictive), s, "n_predictive", 1000);
    n_pred.require(n_pred.value >= 10, loaded, "need at least 10 predictive draws")?;
    let n_truth = pick(args.n_truth, "--n-truth", sec.and_then(|t| t.n_truth), s, "n_truth", 5000);
    n_truth.require(n_truth.value >= 2, loaded, "need at least 2 truth draws")?;
    let reps = pick(args.replicates, "--replicates", sec.and_then(|t| t.replicates), s, "replicates", 1);
    reps.require(reps.value >= 1, loaded, "replicates must be positive")?;
    let eps = pick(args.eps.map(Some), "--eps", sec.map(|t| t.eps), s, "eps", None);
    eps.require(eps.value.is_none_or(|e| e > 0.0 && e < 1.0), loaded, "eps must lie in (0, 1)")?;
    let gamma = pick(args.gamma.map(Some), "--gamma", sec.map(|t| t.gamma), s, "gamma", None);
    gamma.require(gamma.value.is_none_or(|g| g > 0.0 && g.is_finite()), loaded, "gamma must be positive")?;
    let alpha = pick(args.alpha.map(Some), "--alpha", sec.map(|t| t.alpha), s, "alpha", None);
    alpha.require(alpha.value.is_none_or(|a| a > 0.0 && a.is_finite()), loaded, "alpha must be positive")?;
    let radius = pick(args.radius.map(Some), "--radius", sec.map(|t| t.radius), s, "radius", None);
    radius.require(radius.value.is_none_or(|b| b > 0.0 && b.is_finite()), loaded, "radius must be positive")?;

    let settings: Vec<ExperimentSetting> = ids
        .value
        .iter()
        .map(|&id| {
            let base = ExperimentSetting::standard(id).expect("validated id");
            ExperimentSetting {
                d: d.value,
                n_predictive: n_pred.value,
                n_truth: n_truth.value,
                eps: eps.value.unwrap_or(base.eps),
                gamma: gamma.value.unwrap_or(base.gamma),
                alpha: alpha.value.unwrap_or(base.alpha),
                radius: radius.value.unwrap_or(base.radius),
                ..base
            }
        })
        .collect();

    prepare_out(&c.out)?;
    let report = run_tables(&settings, c.seed, reps.value).context("tables")?;
    write_mse_csv(&c.out.join("mse.csv"), &report.mse)?;
    write_coverage_csv(&c.out.join("coverage.csv"), &report.coverage)?;

    println!("{:<8} {:<15} {:>9} {:>9} {:>10} {:>9}", "setting", "method", "mse", "mc_se", "coverage%", "cov_sd");
    for (m, cv) in report.mse.iter().zip(&report.coverage) {
        println!(
            "{:<8} {:<15} {:>9.4} {:>9.4} {:>10.2} {:>9.3}",
            m.setting, m.method, m.mse, m.mc_se, cv.coverage_mean_pct, cv.coverage_sd
        );
    }
    manifest(
        "tables",
        c,
        start,
        &["mse.csv", "coverage.csv"],
        json!({ "settings": settings, "replicates": reps.value }),
    )
}

#[derive(Serialize)]
struct WaterfillDump<'a> {
    kind: Kind,
    alpha: f64,
    radius: f64,
    eps: f64,
    gamma: f64,
    solution: &'a WaterfillSolution,
}

fn waterfill(args: &WaterfillArgs, c: &Common, loaded: &Loaded) -> Result<()> {
    let start = Instant::now();
    let sec = loaded.file.waterfill.as_ref();
    let s = Some("waterfill");
    let kind_file = match sec.and_then(|w| w.kind.as_deref()) {
        None => None,
        Some("sobolev") => Some(Kind::Sobolev),
        Some("exponential") => Some(Kind::Exponential),
        Some(other) => {
            return Err(loaded
                .error_at(s, "kind", format!("unknown ellipsoid kind {other:?}, expected sobolev or exponential"))
                .into())
        }
    };
    let kind = pick(args.kind, "--kind", kind_file, s, "kind", Kind::Sobolev).value;
    let alpha = pick(args.alpha, "--alpha", sec.and_then(|w| w.alpha), s, "alpha", 2.0);
    alpha.require(alpha.value > 0.0 && alpha.value.is_finite(), loaded, "alpha must be positive")?;
    let radius = pick(args.radius, "--radius", sec.and_then(|w| w.radius), s, "radius", 3.0);
    radius.require(radius.value >= 0.0 && radius.value.is_finite(), loaded, "radius must be nonnegative")?;
    let eps = pick(args.eps, "--eps", sec.and_then(|w| w.eps), s, "eps", 0.05);
    eps.require(eps.value > 0.0 && eps.value.is_finite(), loaded, "eps must be positive")?;
    let gamma = pick(args.gamma, "--gamma", sec.and_then(|w| w.gamma), s, "gamma", 1.0);
    gamma.require(gamma.value > 0.0 && gamma.value.is_finite(), loaded, "gamma must be positive")?;

    let spec = match kind {
        Kind::Sobolev => EllipsoidSpec::sobolev(alpha.value, radius.value),
        Kind::Exponential => EllipsoidSpec::exponential(alpha.value, radius.value),
    }?;
    let noise = make_noise(eps.value, gamma.value)?;
    let sol = solve_waterfill(&spec, &noise).context("waterfill")?;

    println!("lambda = {:.12e}", sol.lambda);
    println!("truncation T = {}", sol.truncation);
    println!("minimax_risk = {:.12}", sol.minimax_risk);
    println!("constraint_residual = {:.3e}", sol.constraint_residual);
    for (i, t) in sol.tau_sq.iter().enumerate().take(10) {
        println!("tau_sq[{}] = {:.6e}", i + 1, t);
    }
    if sol.tau_sq.len() > 10 {
        println!("... {} more", sol.tau_sq.len() - 10);
    }

    prepare_out(&c.out)?;
    let dump = WaterfillDump {
        kind,
        alpha: alpha.value,
        radius: radius.value,
        eps: eps.value,
        gamma: gamma.value,
        solution: &sol,
    };
    write_json(&c.out.join("waterfill.json"), &dump)?;
    manifest("waterfill", c, start, &["waterfill.json"], serde_json::to_value(&dump)?)
}

#[derive(Serialize)]
struct ConstantsRow {
    alpha: f64,
    gamma: f64,
    sobolev_constant: f64,
    estimative_constant: f64,
    exp_predictive_coeff: f64,
    exp_estimative_coeff: f64,
}

fn constants(args: &ConstantsArgs, c: &Common, loaded: &Loaded) -> Result<()> {
    let start = Instant::now();
    let sec = loaded.file.constants.as_ref();
    let s = Some("constants");
    let alphas = pick(args.alphas.clone(), "--alphas", sec.and_then(|k| k.alphas.clone()), s, "alphas", vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]);
    alphas.require(
        !alphas.value.is_empty() && alphas.value.iter().all(|a| *a > 0.0 && a.is_finite()),
        loaded,
        "alphas must be a nonempty list of positive numbers",
    )?;
    let gammas = pick(args.gammas.clone(), "--gammas", sec.and_then(|k| k.gammas.clone()), s, "gammas", vec![0.1, 1.0 / 3.0, 1.0, 3.0, 10.0]);
    gammas.require(
        !gammas.value.is_empty() && gammas.value.iter().all(|g| *g > 0.0 && g.is_finite()),
        loaded,
        "gammas must be a nonempty list of positive numbers",
    )?;

    let mut rows = Vec::new();
    for &alpha in &alphas.value {
        for &gamma in &gammas.value {
            let exp = exponential_risk_bound(alpha, gamma)?;
            rows.push(ConstantsRow {
                alpha,
                gamma,
                sobolev_constant: sobolev_constant(alpha, gamma).context("sobolev_constant")?,
                estimative_constant: estimative_constant(alpha, gamma)?,
                exp_predictive_coeff: exp.predictive_coeff,
                exp_estimative_coeff: exp.estimative_coeff,
            });
        }
    }
    println!("{:>6} {:>8} {:>12} {:>12} {:>12} {:>12}", "alpha", "gamma", "sobolev", "estimative", "exp_pred", "exp_est");
    for r in &rows {
        println!(
            "{:>6.3} {:>8.4} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.alpha, r.gamma, r.sobolev_constant, r.estimative_constant, r.exp_predictive_coeff, r.exp_estimative_coeff
        );
    }
    prepare_out(&c.out)?;
    let path = c.out.join("constants.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    manifest(
        "constants",
        c,
        start,
        &["constants.csv"],
        json!({ "alphas": alphas.value, "gammas": gammas.value }),
    )
}

fn bands(args: &BandsArgs, c: &Common, loaded: &Loaded) -> Result<()> {
    let start = Instant::now();
    let sec = loaded.file.bands.as_ref();
    let s = Some("bands");
    let setting = pick(args.setting, "--setting", sec.and_then(|b| b.setting), s, "setting", 2);
    setting.require((1..=6).contains(&setting.value), loaded, "setting id must be between 1 and 6")?;
    let d = pick(args.d, "--d", sec.and_then(|b| b.d), s, "d", REFERENCE_DIM);
    d.require(d.value >= 3, loaded, "d must be at least 3")?;
    let n_pred = pick(args.n_predictive, "--n-predictive", sec.and_then(|b| b.n_predictive), s, "n_predictive", 1000);
    n_pred.require(n_pred.value >= 10, loaded, "need at least 10 predictive draws")?;
    let level = pick(args.level, "--level", sec.and_then(|b| b.level), s, "level", 0.8);
    level.require(level.value > 0.0 && level.value < 1.0, loaded, "level must lie in (0, 1)")?;
    let points = pick(args.grid_points, "--grid-points", sec.and_then(|b| b.grid_points), s, "grid_points", 1000);
    points.require(points.value >= 1, loaded, "grid needs at least one point")?;

    let setting = ExperimentSetting {
        d: d.value,
        n_predictive: n_pred.value,
        ..ExperimentSetting::standard(setting.value)?
    };
    let grid = FunctionGrid::uniform(points.value)?;
    let mut rng = stream(c.seed, setting_task(setting.id, 0));
    let rows = run_bands(&setting, &grid, level.value, &mut rng).context("bands")?;
    prepare_out(&c.out)?;
    write_band_csv(&c.out.join("band.csv"), &rows)?;
    println!("wrote {} rows to {}", rows.len(), c.out.join("band.csv").display());
    manifest(
        "bands",
        c,
        start,
        &["band.csv"],
        json!({ "setting": setting, "level": level.value, "grid_points": points.value }),
    )
}

fn verify(c: &Common) -> Result<bool> {
    let checks = run_verification(c.seed);
    let mut all = true;
    for ch in &checks {
        println!("{} {:<32} {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
        all &= ch.passed;
    }
    println!("verify: {} of {} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len());
    Ok(all)
}

fn run(cli: &Cli) -> Result<bool> {
    let loaded = Loaded::read(cli.config.as_deref())?;
    let c = common(cli, &loaded);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.workers)
        .build()
        .context("cannot start worker pool")?;
    pool.install(|| match &cli.command {
        Command::Tables(a) => tables(a, &c, &loaded).map(|_| true),
        Command::Waterfill(a) => waterfill(a, &c, &loaded).map(|_| true),
        Command::Constants(a) => constants(a, &c, &loaded).map(|_| true),
        Command::Bands(a) => bands(a, &c, &loaded).map(|_| true),
        Command::Verify => verify(&c),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
