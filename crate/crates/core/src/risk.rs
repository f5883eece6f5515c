//! Monte Carlo evaluation of predictive distributions: KL risk, the
//! mean-square and coverage experiments, and the adaptivity ratio.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::function_view::{predictive_band, quantile_sorted, sequence_to_function, FunctionGrid};
use crate::model::{make_noise, EllipsoidSpec, NoiseLevels, ParamVector};
use crate::rng::{setting_task, stream};
use crate::stein::{dimension_for, wgb_blocks, wgb_blocks_with_dim, BlockSystem, BlockwiseStein};
use crate::waterfill::{gaussian_predictive, solve_waterfill, GaussianPredictive};

/// A predictive distribution fitted to one observation `x`.
pub trait FittedPredictive: Send + Sync {
    fn dim(&self) -> usize;

    /// Coordinate-wise predictive mean.
    fn mean(&self) -> Vec<f64>;

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn log_density(&self, _y: &[f64]) -> Result<f64> {
        Err(Error::Unsupported("predictive distribution has no density".into()))
    }

    /// Independent Gaussian close to the predictive distribution, as
    /// `(means, variances)`. Used as a control variate in [`mc_kl_risk`].
    fn gaussian_approximation(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }
}

/// Rule that turns an observation into a predictive distribution.
pub trait PredictiveMethod: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, x: &[f64], noise: &NoiseLevels) -> Result<Box<dyn FittedPredictive>>;
}

fn normal_log_pdf(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (y - mean) * (y - mean) / (2.0 * var)
}

/// Independent Gaussian predictive.
#[derive(Debug, Clone)]
pub struct GaussianFit(GaussianPredictive);

impl GaussianFit {
    pub fn new(means: Vec<f64>, variances: Vec<f64>, tail_variance: f64) -> Self {
        Self(GaussianPredictive {
            means,
            variances,
            tail_variance,
        })
    }
}

impl FittedPredictive for GaussianFit {
    fn dim(&self) -> usize {
        self.0.means.len()
    }

    fn mean(&self) -> Vec<f64> {
        self.0.means.clone()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.0
            .means
            .iter()
            .zip(&self.0.variances)
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * z
            })
            .collect()
    }

    fn log_density(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim() {
            return domain("density argument has the wrong length");
        }
        Ok(y.iter()
            .zip(&self.0.means)
            .zip(&self.0.variances)
            .map(|((&yi, &m), &v)| normal_log_pdf(yi, m, v))
            .sum())
    }

    fn gaussian_approximation(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some((self.0.means.clone(), self.0.variances.clone()))
    }
}

impl FittedPredictive for BlockwiseStein {
    fn dim(&self) -> usize {
        BlockwiseStein::dim(self)
    }

    fn mean(&self) -> Vec<f64> {
        self.posterior_mean()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        self.sample_predictive(rng)
    }

    fn log_density(&self, y: &[f64]) -> Result<f64> {
        BlockwiseStein::log_density(self, y)
    }

    fn gaussian_approximation(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        Some(BlockwiseStein::gaussian_approximation(self))
    }
}

/// Bayes predictive under the prior `⊗ N(0, τ_i²)`; coordinates past the
/// stored variances get `τ_i = 0`.
#[derive(Debug, Clone)]
pub struct GaussianPriorMethod {
    name: String,
    tau_sq: Vec<f64>,
}

impl GaussianPriorMethod {
    pub fn new(name: impl Into<String>, tau_sq: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            tau_sq,
        }
    }

    /// Prior given by the water-filling solution over `spec`.
    pub fn pinsker(spec: &EllipsoidSpec, noise: &NoiseLevels) -> Result<Self> {
        Ok(Self::new(Method::Pinsker.to_string(), solve_waterfill(spec, noise)?.tau_sq))
    }

    pub fn tau_sq(&self) -> &[f64] {
        &self.tau_sq
    }
}

impl PredictiveMethod for GaussianPriorMethod {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, x: &[f64], noise: &NoiseLevels) -> Result<Box<dyn FittedPredictive>> {
        let mut tau = self.tau_sq.clone();
        tau.resize(x.len(), 0.0);
        Ok(Box::new(GaussianFit(gaussian_predictive(&tau, x, noise)?)))
    }
}

/// Bayes predictive under the blockwise Stein prior.
#[derive(Debug, Clone)]
pub struct SteinMethod {
    blocks: BlockSystem,
}

impl SteinMethod {
    pub fn new(blocks: BlockSystem) -> Self {
        Self { blocks }
    }

    /// Weakly geometric blocks on `{1, …, d}`.
    pub fn wgb(eps: f64, d: usize) -> Result<Self> {
        Ok(Self::new(wgb_blocks_with_dim(eps, d)?))
    }

    pub fn blocks(&self) -> &BlockSystem {
        &self.blocks
    }
}

impl PredictiveMethod for SteinMethod {
    fn name(&self) -> &str {
        "BayesWGBStein"
    }

    fn fit(&self, x: &[f64], noise: &NoiseLevels) -> Result<Box<dyn FittedPredictive>> {
        Ok(Box::new(BlockwiseStein::fit(x, &self.blocks, noise)?))
    }
}

/// `N(θ̂, ε̃² I)` with `θ̂` the blockwise Stein posterior mean.
#[derive(Debug, Clone)]
pub struct PluginMethod {
    blocks: BlockSystem,
}

impl PluginMethod {
    pub fn new(blocks: BlockSystem) -> Self {
        Self { blocks }
    }
}

impl PredictiveMethod for PluginMethod {
    fn name(&self) -> &str {
        "PluginWGBStein"
    }

    fn fit(&self, x: &[f64], noise: &NoiseLevels) -> Result<Box<dyn FittedPredictive>> {
        let means = BlockwiseStein::fit(x, &self.blocks, noise)?.posterior_mean();
        let t2 = noise.eps_tilde_sq();
        let vars = vec![t2; means.len()];
        Ok(Box::new(GaussianFit::new(means, vars, t2)))
    }
}

/// The true law `N(θ, ε̃² I)`, ignoring the observation.
#[derive(Debug, Clone)]
pub struct TruthMethod {
    theta: Vec<f64>,
}

impl TruthMethod {
    pub fn new(theta: &ParamVector) -> Self {
        Self {
            theta: theta.as_slice().to_vec(),
        }
    }
}

impl PredictiveMethod for TruthMethod {
    fn name(&self) -> &str {
        "Truth"
    }

    fn fit(&self, x: &[f64], noise: &NoiseLevels) -> Result<Box<dyn FittedPredictive>> {
        let mut means = self.theta.clone();
        means.resize(x.len(), 0.0);
        let t2 = noise.eps_tilde_sq();
        let vars = vec![t2; means.len()];
        Ok(Box::new(GaussianFit::new(means, vars, t2)))
    }
}

fn gaussian_draw<R: Rng + ?Sized>(center: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    center
        .iter()
        .map(|c| {
            let z: f64 = StandardNormal.sample(rng);
            c + sd * z
        })
        .collect()
}

/// `KL(N(θ, ε̃² I) ‖ N(m, diag s))`.
fn kl_truth_to_gaussian(theta: &[f64], t2: f64, means: &[f64], vars: &[f64]) -> f64 {
    theta
        .iter()
        .zip(means)
        .zip(vars)
        .map(|((&th, &m), &s)| 0.5 * ((s / t2).ln() + (t2 + (th - m) * (th - m)) / s - 1.0))
        .sum()
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Monte Carlo estimate of the KL risk `E_X KL(Q_θ ‖ Q̂(·; X))` with its
/// standard error.
///
/// Each replicate draws `(X, Y)` from `P_θ ⊗ Q_θ` and scores
/// `log q_θ(Y) - log q̂(Y; X)`. When the fitted distribution offers a
/// Gaussian approximation `g`, the replicate instead scores
/// `KL(Q_θ ‖ g) + log g(Y) - log q̂(Y; X)`, which has the same expectation.
/// Replicates run in parallel on streams derived from one draw of `rng`.
pub fn mc_kl_risk<R: Rng + ?Sized>(
    theta: &ParamVector,
    method: &dyn PredictiveMethod,
    noise: &NoiseLevels,
    n_rep: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_rep < 2 {
        return domain("mc_kl_risk needs at least two replicates");
    }
    let master: u64 = rng.random();
    let th = theta.as_slice();
    let t2 = noise.eps_tilde_sq();
    let terms: Vec<f64> = (0..n_rep as u64)
        .into_par_iter()
        .map(|rep| -> Result<f64> {
            let mut r = stream(master, rep);
            let x = gaussian_draw(th, noise.eps, &mut r);
            let y = gaussian_draw(th, noise.eps_tilde, &mut r);
            let fitted = method.fit(&x, noise)?;
            if fitted.dim() != th.len() {
                return domain("fitted predictive dimension differs from the parameter");
            }
            let log_q = fitted.log_density(&y)?;
            Ok(match fitted.gaussian_approximation() {
                Some((m, s)) => {
                    let log_g: f64 = y.iter().zip(&m).zip(&s).map(|((&yi, &mi), &si)| normal_log_pdf(yi, mi, si)).sum();
                    kl_truth_to_gaussian(th, t2, &m, &s) + log_g - log_q
                }
                None => {
                    let log_truth: f64 = y.iter().zip(th).map(|(&yi, &ti)| normal_log_pdf(yi, ti, t2)).sum();
                    log_truth - log_q
                }
            })
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&terms))
}

/// Methods compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    BayesWgbStein,
    PluginWgbStein,
    Pinsker,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::BayesWgbStein, Method::PluginWgbStein, Method::Pinsker];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::BayesWgbStein => "BayesWGBStein",
            Method::PluginWgbStein => "PluginWGBStein",
            Method::Pinsker => "Pinsker",
        })
    }
}

/// How the true parameter is generated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ThetaRule {
    /// `θ_i = i^{-power}`.
    PolyDecay { power: f64 },
}

/// One of the simulation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSetting {
    pub id: u32,
    pub theta_rule: ThetaRule,
    pub gamma: f64,
    pub eps: f64,
    pub d: usize,
    /// Smoothness and radius of the ellipsoid the Pinsker method is tuned to.
    pub alpha: f64,
    pub radius: f64,
    pub n_predictive: usize,
    pub n_truth: usize,
}

/// Dimension used by the reference simulations at `ε = 0.05`.
pub const REFERENCE_DIM: usize = 399;

impl ExperimentSetting {
    /// Settings 1 to 6: `θ_i = i^{-6}` (α = 2) or `i^{-1.5}` (α = 0.75), each
    /// with `γ ∈ {1, 1/3, 1/10}`, `ε = 0.05`, `B = 3`.
    pub fn standard(id: u32) -> Result<Self> {
        if !(1..=6).contains(&id) {
            return domain(format!("setting id must be between 1 and 6, got {id}"));
        }
        let (power, alpha) = if id <= 3 { (6.0, 2.0) } else { (1.5, 0.75) };
        let gamma = [1.0, 1.0 / 3.0, 0.1][((id - 1) % 3) as usize];
        Ok(Self {
            id,
            theta_rule: ThetaRule::PolyDecay { power },
            gamma,
            eps: 0.05,
            d: REFERENCE_DIM,
            alpha,
            radius: 3.0,
            n_predictive: 1000,
            n_truth: 5000,
        })
    }

    pub fn all_standard() -> Vec<Self> {
        (1..=6).map(|id| Self::standard(id).expect("valid id")).collect()
    }

    pub fn theta(&self) -> Result<ParamVector> {
        match self.theta_rule {
            ThetaRule::PolyDecay { power } => ParamVector::poly_decay(power, self.d),
        }
    }

    pub fn noise(&self) -> Result<NoiseLevels> {
        make_noise(self.eps, self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 3 {
            return domain(format!("setting {}: d must be at least 3", self.id));
        }
        if self.n_predictive < 10 || self.n_truth < 2 {
            return domain(format!(
                "setting {}: need n_predictive ≥ 10 and n_truth ≥ 2",
                self.id
            ));
        }
        self.noise()?;
        EllipsoidSpec::sobolev(self.alpha, self.radius)?;
        wgb_blocks_with_dim(self.eps, self.d)?;
        Ok(())
    }

    fn method(&self, which: Method, noise: &NoiseLevels) -> Result<Box<dyn PredictiveMethod>> {
        let blocks = wgb_blocks_with_dim(self.eps, self.d)?;
        Ok(match which {
            Method::BayesWgbStein => Box::new(SteinMethod::new(blocks)),
            Method::PluginWgbStein => Box::new(PluginMethod::new(blocks)),
            Method::Pinsker => Box::new(GaussianPriorMethod::pinsker(
                &EllipsoidSpec::sobolev(self.alpha, self.radius)?,
                noise,
            )?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRow {
    pub setting: u32,
    pub method: String,
    pub mse: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub setting: u32,
    pub method: String,
    pub coverage_mean_pct: f64,
    /// Standard deviation over coordinates of the coverage percentage.
    pub coverage_sd: f64,
    pub n_predictive: usize,
    pub n_truth: usize,
}

/// Both tables for one setting, from a shared observation and shared truth draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingOutcome {
    pub mse: Vec<MseRow>,
    pub coverage: Vec<CoverageRow>,
}

/// Percentage of truth draws inside each coordinate's interval.
fn coverage_by_coordinate(
    draws: &[Vec<f64>],
    truth: &[Vec<f64>],
    p_lo: f64,
    p_hi: f64,
) -> Vec<f64> {
    let d = truth[0].len();
    (0..d)
        .map(|i| {
            let mut col: Vec<f64> = draws.iter().map(|s| s[i]).collect();
            col.sort_by(f64::total_cmp);
            let lo = quantile_sorted(&col, p_lo);
            let hi = quantile_sorted(&col, p_hi);
            let inside = truth.iter().filter(|y| y[i] >= lo && y[i] <= hi).count();
            100.0 * inside as f64 / truth.len() as f64
        })
        .collect()
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Coverage of the empirical `[q_{0.1}, q_{0.9}]` interval built from
/// `n_predictive` draws of `fitted`, measured against `truth`.
pub fn interval_coverage(
    fitted: &dyn FittedPredictive,
    truth: &[Vec<f64>],
    n_predictive: usize,
    rng: &mut dyn RngCore,
) -> Result<(f64, f64)> {
    if truth.is_empty() || n_predictive < 2 {
        return domain("coverage needs truth draws and at least two predictive draws");
    }
    let draws: Vec<Vec<f64>> = (0..n_predictive).map(|_| fitted.sample(rng)).collect();
    let pct = coverage_by_coordinate(&draws, truth, 0.1, 0.9);
    let mean = pct.iter().sum::<f64>() / pct.len() as f64;
    let sd = if pct.len() > 1 { sample_sd(&pct) } else { 0.0 };
    Ok((mean, sd))
}

/// One observation, `n_truth` future draws, and every method scored on both
/// the mean-square error of its mean path and its interval coverage.
pub fn run_setting<R: Rng + ?Sized>(setting: &ExperimentSetting, rng: &mut R) -> Result<SettingOutcome> {
    setting.validate()?;
    let noise = setting.noise()?;
    let theta = setting.theta()?;
    let th = theta.as_slice();
    let t2 = noise.eps_tilde_sq();

    let x = gaussian_draw(th, noise.eps, rng);
    let truth: Vec<Vec<f64>> = (0..setting.n_truth)
        .map(|_| gaussian_draw(th, noise.eps_tilde, rng))
        .collect();

    let mut mse = Vec::new();
    let mut coverage = Vec::new();
    for which in Method::ALL {
        let fitted = setting.method(which, &noise)?.fit(&x, &noise)?;
        let mean = fitted.mean();
        let per_draw: Vec<f64> = truth
            .iter()
            .map(|y| {
                y.iter().zip(&mean).map(|(a, m)| (a - m) * (a - m)).sum::<f64>() / (th.len() as f64 * t2)
            })
            .collect();
        let (m, se) = mean_and_se(&per_draw);
        mse.push(MseRow {
            setting: setting.id,
            method: which.to_string(),
            mse: m,
            mc_se: se,
        });

        let mut dyn_rng = RngAdapter(rng);
        let (cov_mean, cov_sd) = interval_coverage(fitted.as_ref(), &truth, setting.n_predictive, &mut dyn_rng)?;
        coverage.push(CoverageRow {
            setting: setting.id,
            method: which.to_string(),
            coverage_mean_pct: cov_mean,
            coverage_sd: cov_sd,
            n_predictive: setting.n_predictive,
            n_truth: setting.n_truth,
        });
    }
    Ok(SettingOutcome { mse, coverage })
}

/// Lets a possibly unsized `Rng` be passed where `&mut dyn RngCore` is expected.
struct RngAdapter<'a, R: ?Sized>(&'a mut R);

impl<R: Rng + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Mean-square error rows for one setting.
pub fn run_mse_experiment<R: Rng + ?Sized>(setting: &ExperimentSetting, rng: &mut R) -> Result<Vec<MseRow>> {
    Ok(run_setting(setting, rng)?.mse)
}

/// Coverage rows for one setting.
pub fn run_coverage_experiment<R: Rng + ?Sized>(
    setting: &ExperimentSetting,
    rng: &mut R,
) -> Result<Vec<CoverageRow>> {
    Ok(run_setting(setting, rng)?.coverage)
}

/// Results of a batch of settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub replicates: u32,
    pub mse: Vec<MseRow>,
    pub coverage: Vec<CoverageRow>,
    pub wall_time_secs: f64,
}

/// Run every setting `replicates` times, each replicate with a fresh
/// observation, and average. Replicate `r` of setting `s` uses the stream
/// `(seed, s, r)`, so the output does not depend on the thread pool.
///
/// With one replicate `mc_se` is the within-run standard error; with more it
/// is the standard error of the mean over replicates.
pub fn run_tables(settings: &[ExperimentSetting], seed: u64, replicates: u32) -> Result<ExperimentReport> {
    if replicates == 0 {
        return domain("replicates must be positive");
    }
    let start = std::time::Instant::now();
    let tasks: Vec<(usize, u32)> = (0..settings.len())
        .flat_map(|s| (0..replicates).map(move |r| (s, r)))
        .collect();
    let outcomes: Vec<SettingOutcome> = tasks
        .par_iter()
        .map(|&(s, r)| {
            let mut rng = stream(seed, setting_task(settings[s].id, r));
            run_setting(&settings[s], &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut mse = Vec::new();
    let mut coverage = Vec::new();
    for (s, chunk) in outcomes.chunks(replicates as usize).enumerate() {
        debug_assert!(chunk.iter().all(|o| o.mse[0].setting == settings[s].id));
        for k in 0..Method::ALL.len() {
            let vals: Vec<f64> = chunk.iter().map(|o| o.mse[k].mse).collect();
            let (m, se) = if chunk.len() > 1 {
                mean_and_se(&vals)
            } else {
                (chunk[0].mse[k].mse, chunk[0].mse[k].mc_se)
            };
            mse.push(MseRow {
                mc_se: se,
                mse: m,
                ..chunk[0].mse[k].clone()
            });
            let n = chunk.len() as f64;
            coverage.push(CoverageRow {
                coverage_mean_pct: chunk.iter().map(|o| o.coverage[k].coverage_mean_pct).sum::<f64>() / n,
                coverage_sd: chunk.iter().map(|o| o.coverage[k].coverage_sd).sum::<f64>() / n,
                ..chunk[0].coverage[k].clone()
            });
        }
    }
    Ok(ExperimentReport {
        seed,
        replicates,
        mse,
        coverage,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// One grid point of a pointwise predictive band in function space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub t: f64,
    pub true_f: f64,
    pub method: String,
    pub lower: f64,
    pub mean: f64,
    pub upper: f64,
}

/// Pointwise `level` bands of each method's predictive draws, mapped to
/// functions on `grid`, for one observation from `setting`.
pub fn run_bands<R: Rng + ?Sized>(
    setting: &ExperimentSetting,
    grid: &FunctionGrid,
    level: f64,
    rng: &mut R,
) -> Result<Vec<BandRow>> {
    setting.validate()?;
    let noise = setting.noise()?;
    let theta = setting.theta()?;
    let true_f = sequence_to_function(&theta, grid);
    let x = gaussian_draw(theta.as_slice(), noise.eps, rng);
    let mut rows = Vec::with_capacity(Method::ALL.len() * grid.len());
    for which in Method::ALL {
        let fitted = setting.method(which, &noise)?.fit(&x, &noise)?;
        let mut adapter = RngAdapter(&mut *rng);
        let draws: Vec<Vec<f64>> = (0..setting.n_predictive).map(|_| fitted.sample(&mut adapter)).collect();
        let band = predictive_band(&draws, grid, level)?;
        for (k, &t) in grid.points().iter().enumerate() {
            rows.push(BandRow {
                t,
                true_f: true_f[k],
                method: which.to_string(),
                lower: band.lower[k],
                mean: band.mean[k],
                upper: band.upper[k],
            });
        }
    }
    Ok(rows)
}

/// Risk of the Stein predictive at one probe parameter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRisk {
    pub probe: String,
    pub risk: f64,
    pub risk_se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptivityPoint {
    pub eps: f64,
    pub d: usize,
    pub minimax_risk: f64,
    pub probes: Vec<ProbeRisk>,
}

impl AdaptivityPoint {
    /// Largest risk ratio over the probes.
    pub fn sup_ratio(&self) -> &ProbeRisk {
        self.probes
            .iter()
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .expect("at least one probe")
    }

    pub fn probe(&self, name: &str) -> Option<&ProbeRisk> {
        self.probes.iter().find(|p| p.probe == name)
    }
}

/// Boundary points of the Sobolev ellipsoid used as probes, each of length `d`.
fn adaptivity_probes(spec: &EllipsoidSpec, tau_sq: &[f64], d: usize) -> Result<Vec<(&'static str, ParamVector)>> {
    let mut lf: Vec<f64> = tau_sq.iter().map(|t| t.sqrt()).collect();
    lf.resize(d, 0.0);

    let mut single = vec![0.0; d];
    single[0] = spec.radius.sqrt() / spec.coeff(1)?;

    // θ_i ∝ i^{-α-1}, rescaled onto the boundary
    let alpha = match spec.kind {
        crate::model::EllipsoidKind::Sobolev { alpha } => alpha,
        _ => return domain("adaptivity probes need a Sobolev ellipsoid"),
    };
    let raw: Vec<f64> = (1..=d).map(|i| (i as f64).powf(-alpha - 1.0)).collect();
    let norm: f64 = raw.iter().enumerate().map(|(i, r)| spec.coeff_sq(i + 1).map(|a2| a2 * r * r)).sum::<Result<f64>>()?;
    let scale = (spec.radius / norm).sqrt();
    let smooth = raw.iter().map(|r| r * scale).collect();

    Ok(vec![
        ("least_favorable", ParamVector::new(lf)?),
        ("single_coordinate", ParamVector::new(single)?),
        ("smooth_boundary", ParamVector::new(smooth)?),
    ])
}

/// For each `ε` in a decreasing grid, the KL risk of the weakly geometric
/// blockwise Stein predictive at boundary probes of the Sobolev ellipsoid,
/// relative to the minimax risk.
pub fn adaptivity_ratio<R: Rng + ?Sized>(
    alpha: f64,
    radius: f64,
    gamma: f64,
    eps_grid: &[f64],
    n_rep: usize,
    rng: &mut R,
) -> Result<Vec<AdaptivityPoint>> {
    if eps_grid.is_empty() || eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return domain("eps grid must be nonempty and strictly decreasing");
    }
    let spec = EllipsoidSpec::sobolev(alpha, radius)?;
    let mut out = Vec::with_capacity(eps_grid.len());
    for &eps in eps_grid {
        let noise = make_noise(eps, gamma)?;
        let sol = solve_waterfill(&spec, &noise)?;
        let d = dimension_for(eps);
        if sol.truncation > d {
            return Err(Error::Unsupported(format!(
                "water-filling truncation {} exceeds dimension {d}",
                sol.truncation
            )));
        }
        let method = SteinMethod::new(wgb_blocks(eps)?);
        let mut probes = Vec::new();
        for (name, theta) in adaptivity_probes(&spec, &sol.tau_sq, d)? {
            let (risk, se) = mc_kl_risk(&theta, &method, &noise, n_rep, rng)?;
            probes.push(ProbeRisk {
                probe: name.to_string(),
                risk,
                risk_se: se,
                ratio: risk / sol.minimax_risk,
                ratio_se: se / sol.minimax_risk,
            });
        }
        out.push(AdaptivityPoint {
            eps,
            d,
            minimax_risk: sol.minimax_risk,
            probes,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waterfill::kl_risk_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct NoDensity;

    struct NoDensityFit(usize);

    impl FittedPredictive for NoDensityFit {
        fn dim(&self) -> usize {
            self.0
        }
        fn mean(&self) -> Vec<f64> {
            vec![0.0; self.0]
        }
        fn sample(&self, _rng: &mut dyn RngCore) -> Vec<f64> {
            vec![0.0; self.0]
        }
    }

    impl PredictiveMethod for NoDensity {
        fn name(&self) -> &str {
            "none"
        }
        fn fit(&self, x: &[f64], _noise: &NoiseLevels) -> Result<Box<dyn FittedPredictive>> {
            Ok(Box::new(NoDensityFit(x.len())))
        }
    }

    #[test]
    fn method_without_density_is_rejected() {
        let noise = make_noise(1.0, 1.0).unwrap();
        let theta = ParamVector::zeros(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            mc_kl_risk(&theta, &NoDensity, &noise, 10, &mut rng),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn point_mass_prior_at_zero_has_zero_risk() {
        let noise = make_noise(0.5, 0.7).unwrap();
        let theta = ParamVector::zeros(4).unwrap();
        let method = GaussianPriorMethod::new("zero", vec![0.0; 4]);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (est, se) = mc_kl_risk(&theta, &method, &noise, 50, &mut rng).unwrap();
        assert!(est.abs() < 1e-12 && se < 1e-12);
    }

    #[test]
    fn gaussian_method_matches_closed_form() {
        let noise = make_noise(1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let theta = ParamVector::new((0..6).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
            let tau: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..3.0)).collect();
            let method = GaussianPriorMethod::new("g", tau.clone());
            let (est, se) = mc_kl_risk(&theta, &method, &noise, 4000, &mut rng).unwrap();
            let exact = kl_risk_gaussian(&theta, &tau, &noise);
            assert!((est - exact).abs() < 3.5 * se, "{est} ± {se} vs {exact}");
        }
    }

    #[test]
    fn settings_table() {
        let s = ExperimentSetting::all_standard();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0].theta_rule, ThetaRule::PolyDecay { power: 6.0 });
        assert_eq!(s[4].theta_rule, ThetaRule::PolyDecay { power: 1.5 });
        assert_eq!((s[2].alpha, s[3].alpha), (2.0, 0.75));
        assert!((s[5].gamma - 0.1).abs() < 1e-15);
        assert!(s.iter().all(|x| x.d == 399 && x.radius == 3.0));
        assert!(ExperimentSetting::standard(7).is_err());
    }

    #[test]
    fn truth_intervals_cover_eighty_percent() {
        let setting = ExperimentSetting {
            d: 50,
            n_predictive: 4000,
            n_truth: 4000,
            ..ExperimentSetting::standard(4).unwrap()
        };
        let noise = setting.noise().unwrap();
        let theta = setting.theta().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth: Vec<Vec<f64>> = (0..setting.n_truth).map(|_| gaussian_draw(theta.as_slice(), noise.eps_tilde, &mut rng)).collect();
        let fitted = TruthMethod::new(&theta).fit(&vec![0.0; 50], &noise).unwrap();
        let (mean, _) = interval_coverage(fitted.as_ref(), &truth, setting.n_predictive, &mut rng).unwrap();
        assert!((mean - 80.0).abs() < 1.0, "{mean}");
    }

    #[test]
    fn bayes_and_plugin_share_the_mean_path() {
        let setting = ExperimentSetting {
            n_predictive: 20,
            n_truth: 30,
            ..ExperimentSetting::standard(2).unwrap()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out = run_setting(&setting, &mut rng).unwrap();
        assert_eq!(out.mse[0].mse, out.mse[1].mse);
        assert!(out.mse.iter().all(|r| r.mse > 0.0));
        assert!(out.coverage.iter().all(|r| (0.0..=100.0).contains(&r.coverage_mean_pct)));
    }

    #[test]
    fn tables_do_not_depend_on_thread_count() {
        let settings: Vec<ExperimentSetting> = [1, 6]
            .iter()
            .map(|&id| ExperimentSetting {
                n_predictive: 50,
                n_truth: 100,
                ..ExperimentSetting::standard(id).unwrap()
            })
            .collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_tables(&settings, 9, 2).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.mse, b.mse);
        assert_eq!(a.coverage, b.coverage);
    }

    #[test]
    fn adaptivity_grid_must_decrease() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        assert!(adaptivity_ratio(1.0, 1.0, 1.0, &[0.05, 0.1], 10, &mut rng).is_err());
    }
}
