//! Credible balls around the adaptive fit: the radius r_n(λ, q), the ball
//! Ĉ_n(L), posterior sampling from the marginal t posterior and coverage
//! experiments.
//!
//! Norms use ‖v‖² = (1/n)Σ v_i² throughout.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ebcore::{fit, FitOptions, FitResult, ModelFamily, QGrid};
use crate::error::{check_len, Error, Result};
use crate::rng::{derive_seed, substream};
use crate::simlab::{Generator, NoiseModel};
use crate::spectral::{smoother_weights, DesignConvention, DesignGrid, EigenSequence};

/// ‖v‖ = ((1/n)Σ v_i²)^{1/2}.
pub fn norm(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Monte Carlo settings for r_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusSpec {
    pub alpha: f64,
    pub mc_draws: usize,
    pub seed: u64,
}

impl Default for RadiusSpec {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            mc_draws: 10_000,
            seed: 0x5eed,
        }
    }
}

impl RadiusSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "α must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.mc_draws < 1000 {
            return Err(Error::InvalidArgument(format!(
                "radius needs at least 1000 draws, got {}",
                self.mc_draws
            )));
        }
        Ok(())
    }
}

/// Weights below this are replaced by their mean contribution Σw; the omitted
/// fluctuation has standard deviation below 1e−12·(2n)^{1/2}.
const WEIGHT_FLOOR: f64 = 1e-12;

/// Draw k of ZᵀS Z/N with Z ~ N(0, I_n), N ~ χ²_n, on stream k of `seed`.
fn quadratic_draw(
    weights: &[f64],
    floor_mass: f64,
    chi: &ChiSquared<f64>,
    seed: u64,
    k: u64,
) -> f64 {
    let mut rng = substream(seed, k);
    let s: f64 = weights
        .iter()
        .map(|w| {
            let z: f64 = rng.sample(StandardNormal);
            w * z * z
        })
        .sum();
    (s + floor_mass) / chi.sample(&mut rng)
}

/// r_n(λ, q): square root of the (1 − α) quantile of ZᵀS_{λ,q}Z/N.
///
/// Deterministic given (spectrum, λ, spec); draw k always uses substream k, so
/// radii at different λ share random numbers.
pub fn radius(eigen: &EigenSequence, lambda: f64, spec: &RadiusSpec) -> Result<f64> {
    spec.validate()?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    let w = smoother_weights(eigen, lambda)?;
    let kept: Vec<f64> = w.iter().copied().filter(|&v| v >= WEIGHT_FLOOR).collect();
    let floor_mass: f64 = w.iter().copied().filter(|&v| v < WEIGHT_FLOOR).sum();
    let chi = ChiSquared::new(eigen.len() as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let mut draws: Vec<f64> = (0..spec.mc_draws as u64)
        .into_par_iter()
        .map(|k| quadratic_draw(&kept, floor_mass, &chi, spec.seed, k))
        .collect();
    Ok(quantile(&mut draws, 1.0 - spec.alpha).sqrt())
}

/// Order-statistic quantile at ⌈p·m⌉.
fn quantile(values: &mut [f64], p: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let k = ((p * m as f64).ceil() as usize).clamp(1, m);
    values[k - 1]
}

/// Ĉ_n(L) = {f : ‖f − f̂‖ ≤ σ̂ L r_n(λ̂, q̂)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub r_n: f64,
    pub sigma_hat: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub alpha: f64,
    pub lambda_hat: f64,
    pub q_hat: f64,
}

impl CredibleBall {
    pub fn distance(&self, f: &[f64]) -> Result<f64> {
        check_len(self.center.len(), f.len())?;
        Ok(distance(f, &self.center))
    }

    pub fn contains(&self, f: &[f64]) -> Result<bool> {
        Ok(self.distance(f)? <= self.radius)
    }

    /// Same center, inflation L′.
    pub fn with_inflation(&self, l: f64) -> Result<Self> {
        check_inflation(l)?;
        Ok(Self {
            radius: self.sigma_hat * l * self.r_n,
            l,
            ..self.clone()
        })
    }
}

fn check_inflation(l: f64) -> Result<()> {
    if l >= 1.0 && l.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "inflation L must be at least 1, got {l}"
        )))
    }
}

/// Default inflation: the uniform lower bound L ≥ 2.
pub const DEFAULT_INFLATION: f64 = 2.0;

pub fn credible_ball(fit: &FitResult, l: f64, spec: &RadiusSpec) -> Result<CredibleBall> {
    check_inflation(l)?;
    let r_n = radius(fit.model.eigen(), fit.lambda_hat, spec)?;
    let sigma_hat = fit.sigma2_hat.max(0.0).sqrt();
    Ok(CredibleBall {
        center: fit.fitted.clone(),
        radius: sigma_hat * l * r_n,
        r_n,
        sigma_hat,
        l,
        alpha: spec.alpha,
        lambda_hat: fit.lambda_hat,
        q_hat: fit.q_hat,
    })
}

/// Marginal posterior t_n(f̂, σ̂² S) in the spectral domain.
#[derive(Debug, Clone)]
pub struct PosteriorSampler<'a> {
    fit: &'a FitResult,
    center_coeffs: Vec<f64>,
    scale: Vec<f64>,
    dof: f64,
}

impl<'a> PosteriorSampler<'a> {
    pub fn new(fit: &'a FitResult) -> Result<Self> {
        let w = fit.weights();
        let center_coeffs = fit.coeffs.iter().zip(&w).map(|(x, w)| x * w).collect();
        let s2 = fit.sigma2_hat.max(0.0);
        let scale = w.iter().map(|w| (s2 * w).sqrt()).collect();
        Ok(Self {
            fit,
            center_coeffs,
            scale,
            dof: fit.coeffs.len() as f64,
        })
    }

    /// Degrees of freedom of the t law (n for a = q/2, b = 0).
    pub fn dof(&self) -> f64 {
        self.dof
    }

    /// Draw k: Gaussian with covariance σ̂²S divided by (χ²_n/n)^{1/2}.
    pub fn draw(&self, seed: u64, k: u64) -> Result<Vec<f64>> {
        let mut rng = substream(seed, k);
        let chi = ChiSquared::new(self.dof).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut c: Vec<f64> = self
            .scale
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let u = (chi.sample(&mut rng) / self.dof).sqrt();
        for (ci, m) in c.iter_mut().zip(&self.center_coeffs) {
            *ci = m + *ci / u;
        }
        self.fit.model.inverse(&c)
    }
}

/// `draws` posterior function draws on the design.
pub fn sample_posterior(fit: &FitResult, draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one draw".into()));
    }
    let sampler = PosteriorSampler::new(fit)?;
    (0..draws as u64)
        .into_par_iter()
        .map(|k| sampler.draw(seed, k))
        .collect()
}

/// Settings shared by the coverage experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageConfig {
    pub generator: Generator,
    pub n: usize,
    pub replicates: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub radius: RadiusSpec,
    pub noise: NoiseModel,
    pub design: DesignConvention,
    pub q_grid: Vec<f64>,
    pub fit: FitOptions,
    pub seed: u64,
}

impl CoverageConfig {
    pub fn new(generator: Generator, n: usize, replicates: usize) -> Self {
        Self {
            generator,
            n,
            replicates,
            l: DEFAULT_INFLATION,
            radius: RadiusSpec::default(),
            noise: NoiseModel::default(),
            design: DesignConvention::Right,
            q_grid: QGrid::default_integer().values().to_vec(),
            fit: FitOptions::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub median: f64,
    pub q95: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        Self {
            q05: quantile(&mut v, 0.05),
            median: quantile(&mut v, 0.5),
            q95: quantile(&mut v, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub generator: String,
    pub n: usize,
    pub replicates: usize,
    #[serde(rename = "L")]
    pub l: f64,
    pub alpha: f64,
    pub coverage: f64,
    pub radius_quantiles: Quantiles,
    pub radii: Vec<f64>,
    pub covered: Vec<bool>,
    pub q_hat: Vec<f64>,
}

/// Stream label for observation noise of replicate r.
pub(crate) const NOISE_STREAM: u64 = 1;

/// Data for replicate `rep`: noise on substream `rep` of the experiment's noise seed.
pub(crate) fn replicate_data(
    f: &[f64],
    noise: &NoiseModel,
    seed: u64,
    label: u64,
    rep: u64,
) -> Vec<f64> {
    noise.observe(f, &mut substream(derive_seed(seed, label), rep))
}

/// Empirical frequentist coverage of Ĉ_n(L) for the true f.
pub fn coverage_experiment(cfg: &CoverageConfig) -> Result<CoverageReport> {
    if cfg.replicates < 50 {
        return Err(Error::InvalidArgument(format!(
            "coverage needs at least 50 replicates, got {}",
            cfg.replicates
        )));
    }
    check_inflation(cfg.l)?;
    cfg.radius.validate()?;
    let grid = DesignGrid::new(cfg.n, cfg.design)?;
    let family = ModelFamily::analytic(grid.clone());
    let qgrid = QGrid::new(cfg.q_grid.clone())?;
    let f = cfg.generator.generate(&grid)?;
    for &q in qgrid.values() {
        family.basis(q)?;
    }
    let per_rep = (0..cfg.replicates as u64)
        .map(|rep| {
            let y = replicate_data(&f, &cfg.noise, cfg.seed, NOISE_STREAM, rep);
            let fitted = fit(&family, &y, &qgrid, &cfg.fit)?;
            let ball = credible_ball(&fitted, cfg.l, &cfg.radius)?;
            Ok((ball.contains(&f)?, ball.radius, fitted.q_hat))
        })
        .collect::<Result<Vec<_>>>()?;
    let covered: Vec<bool> = per_rep.iter().map(|r| r.0).collect();
    let radii: Vec<f64> = per_rep.iter().map(|r| r.1).collect();
    Ok(CoverageReport {
        generator: cfg.generator.name(),
        n: cfg.n,
        replicates: cfg.replicates,
        l: cfg.l,
        alpha: cfg.radius.alpha,
        coverage: covered.iter().filter(|&&c| c).count() as f64 / cfg.replicates as f64,
        radius_quantiles: Quantiles::of(&radii),
        q_hat: per_rep.iter().map(|r| r.2).collect(),
        radii,
        covered,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusRate {
    pub n: Vec<usize>,
    pub median_radius: Vec<f64>,
    pub coverage: Vec<f64>,
    /// Least-squares slope of log median radius on log n.
    pub slope: f64,
    /// −β/(2β + 1) for the generator's nominal β, if any.
    pub target_slope: Option<f64>,
}

/// Coverage experiments over several n and the radius-rate slope.
pub fn radius_rate(
    base: &CoverageConfig,
    ns: &[usize],
) -> Result<(RadiusRate, Vec<CoverageReport>)> {
    if ns.len() < 2 {
        return Err(Error::InvalidArgument(
            "radius rate needs at least two sample sizes".into(),
        ));
    }
    let reports = ns
        .iter()
        .map(|&n| coverage_experiment(&CoverageConfig { n, ..base.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = reports
        .iter()
        .map(|r| r.radius_quantiles.median.ln())
        .collect();
    let rate = RadiusRate {
        n: ns.to_vec(),
        median_radius: reports.iter().map(|r| r.radius_quantiles.median).collect(),
        coverage: reports.iter().map(|r| r.coverage).collect(),
        slope: ols_slope(&xs, &ys),
        target_slope: base.generator.beta_nominal().map(|b| -b / (2.0 * b + 1.0)),
    };
    Ok((rate, reports))
}

pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
