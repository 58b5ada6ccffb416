//! Frequentist comparator: GCV (or Mallows' C_p) selection of λ at fixed q,
//! and the coverage-loss experiment for balls centred at the GCV fit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credible::{
    credible_ball, norm, radius, replicate_data, RadiusSpec, DEFAULT_INFLATION, NOISE_STREAM,
};
use crate::ebcore::{fit, FitOptions, LambdaSearch, ModelFamily, QGrid};
use crate::error::{check_len, Error, Result};
use crate::oracle::{oracle_lambda, OracleMethod};
use crate::simlab::{Generator, NoiseModel};
use crate::spectral::{eigenvalues, DesignConvention, DesignGrid, EigenSequence};

/// Second noise stream for the independent λ̂_f sample.
const SECOND_STREAM: u64 = 2;

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "λ must be positive and finite, got {lambda}"
        )))
    }
}

/// GCV(λ) = n Σ X²(t/(1+t))² / (Σ t/(1+t))², t = λnη, over i > ⌊q⌋.
pub fn gcv_criterion(eigen: &EigenSequence, coeffs: &[f64], lambda: f64) -> Result<f64> {
    check_len(eigen.len(), coeffs.len())?;
    check_lambda(lambda)?;
    let d = eigen.null_dim();
    let (mut num, mut den) = (0.0, 0.0);
    for (&e, &x) in eigen.values()[d..].iter().zip(&coeffs[d..]) {
        let t = lambda * e;
        let r = t / (1.0 + t);
        num += x * x * r * r;
        den += r;
    }
    Ok(eigen.len() as f64 * num / (den * den))
}

/// Mallows' C_p(λ) = (1/n)‖(I − S)Y‖² + 2σ² tr(S)/n with known σ².
pub fn mallows_cp(eigen: &EigenSequence, coeffs: &[f64], lambda: f64, sigma2: f64) -> Result<f64> {
    check_len(eigen.len(), coeffs.len())?;
    check_lambda(lambda)?;
    let n = eigen.len() as f64;
    let (mut rss, mut tr) = (0.0, 0.0);
    for (&e, &x) in eigen.values().iter().zip(coeffs) {
        let t = lambda * e;
        let r = t / (1.0 + t);
        rss += x * x * r * r;
        tr += 1.0 / (1.0 + t);
    }
    Ok(rss / n + 2.0 * sigma2 * tr / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Criterion {
    #[default]
    Gcv,
    MallowsCp {
        sigma2: f64,
    },
}

impl Criterion {
    pub fn eval(&self, eigen: &EigenSequence, coeffs: &[f64], lambda: f64) -> Result<f64> {
        match *self {
            Criterion::Gcv => gcv_criterion(eigen, coeffs, lambda),
            Criterion::MallowsCp { sigma2 } => mallows_cp(eigen, coeffs, lambda, sigma2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvOptions {
    pub criterion: Criterion,
    /// Interval; shared with the marginal-likelihood search.
    pub search: LambdaSearch,
    pub grid_points: usize,
    /// Golden-section tolerance relative to |log λ|.
    pub rel_tol: f64,
}

impl Default for GcvOptions {
    fn default() -> Self {
        Self {
            criterion: Criterion::Gcv,
            search: LambdaSearch::default(),
            grid_points: 60,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvResult {
    pub lambda_f_hat: f64,
    pub q: f64,
    pub criterion_value: f64,
    pub boundary_flag: bool,
}

/// Minimiser of the criterion in log λ: coarse grid, then golden section.
pub fn select_lambda_gcv(
    eigen: &EigenSequence,
    coeffs: &[f64],
    opts: &GcvOptions,
) -> Result<GcvResult> {
    check_len(eigen.len(), coeffs.len())?;
    if opts.grid_points < 3 {
        return Err(Error::InvalidArgument(
            "GCV grid needs at least three points".into(),
        ));
    }
    let (lo, hi) = opts.search.interval(eigen)?;
    let (a, b) = (lo.ln(), hi.ln());
    let m = opts.grid_points;
    let node = |k: usize| a + (b - a) * k as f64 / (m - 1) as f64;
    let g = |u: f64| opts.criterion.eval(eigen, coeffs, u.exp());
    let mut best = (0, f64::INFINITY);
    for k in 0..m {
        let v = g(node(k))?;
        if v < best.1 {
            best = (k, v);
        }
    }
    let k = best.0;
    let (mut l, mut r) = (node(k.saturating_sub(1)), node((k + 1).min(m - 1)));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = r - phi * (r - l);
    let mut x2 = l + phi * (r - l);
    let (mut f1, mut f2) = (g(x1)?, g(x2)?);
    let tol = opts.rel_tol * a.abs().max(b.abs()).max(1.0);
    while r - l > tol {
        if f1 <= f2 {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - phi * (r - l);
            f1 = g(x1)?;
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (r - l);
            f2 = g(x2)?;
        }
    }
    let (mut u, mut v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    // Keep the grid point if refinement did not improve on it.
    if best.1 < v {
        u = node(k);
        v = best.1;
    }
    let boundary_flag = (u - a).abs() <= tol || (b - u).abs() <= tol;
    Ok(GcvResult {
        lambda_f_hat: u.exp(),
        q: eigen.q(),
        criterion_value: v,
        boundary_flag,
    })
}

/// GCV fit at order q: λ̂_f and S_{λ̂_f,q} y.
pub fn gcv_fit(
    family: &ModelFamily,
    y: &[f64],
    q: f64,
    opts: &GcvOptions,
) -> Result<(GcvResult, Vec<f64>)> {
    let model = family.model(q)?;
    let x = model.forward(y)?;
    let res = select_lambda_gcv(model.eigen(), &x, opts)?;
    Ok((res, model.smooth(&x, res.lambda_f_hat)?))
}

/// Coverage-loss experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Config {
    pub generator: Generator,
    pub n: usize,
    pub q_choices: Vec<f64>,
    pub replicates: usize,
    /// Smoothness β used for the oracle radius σ r_n(λ_β, β).
    pub beta: f64,
    pub radius: RadiusSpec,
    pub noise: NoiseModel,
    pub design: DesignConvention,
    /// Inflation of the contrasting adaptive ball.
    #[serde(rename = "L")]
    pub l: f64,
    pub q_grid: Vec<f64>,
    pub gcv: GcvOptions,
    /// λ̂_f from a second independent sample; otherwise from the same sample.
    pub independent_samples: bool,
    pub seed: u64,
}

impl Theorem4Config {
    pub fn new(generator: Generator, n: usize, replicates: usize) -> Self {
        Self {
            beta: generator.beta_nominal().unwrap_or(3.0),
            generator,
            n,
            q_choices: vec![2.0],
            replicates,
            radius: RadiusSpec::default(),
            noise: NoiseModel::default(),
            design: DesignConvention::Right,
            l: DEFAULT_INFLATION,
            q_grid: QGrid::default_integer().values().to_vec(),
            gcv: GcvOptions::default(),
            independent_samples: true,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Row {
    pub q: f64,
    pub coverage_gcv_ball: f64,
    pub mean_lambda_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem4Report {
    pub generator: String,
    pub n: usize,
    pub replicates: usize,
    pub beta: f64,
    pub lambda_beta: f64,
    /// σ r_n(λ_β, β).
    pub gcv_radius: f64,
    pub coverage_eb_ball: f64,
    pub rows: Vec<Theorem4Row>,
}

/// Coverage of D̂_n = {f : ‖f − f̂_{λ̂_f,q}‖ ≤ σ r_n(λ_β, β)} against Ĉ_n(L).
pub fn theorem4_experiment(cfg: &Theorem4Config) -> Result<Theorem4Report> {
    if cfg.replicates == 0 || cfg.q_choices.is_empty() {
        return Err(Error::InvalidArgument(
            "need replicates and at least one q".into(),
        ));
    }
    if cfg
        .q_choices
        .iter()
        .any(|&q| q < cfg.beta / 2.0 || q > cfg.beta)
    {
        return Err(Error::InvalidArgument(format!(
            "q choices must lie in [β/2, β] = [{}, {}]",
            cfg.beta / 2.0,
            cfg.beta
        )));
    }
    let grid = DesignGrid::new(cfg.n, cfg.design)?;
    let family = ModelFamily::analytic(grid.clone());
    let qgrid = QGrid::new(cfg.q_grid.clone())?;
    let f = cfg.generator.generate(&grid)?;
    let sigma = cfg.noise.sigma;
    let spectrum = cfg.generator.spectrum(&grid, cfg.beta)?;
    let lambda_beta = oracle_lambda(
        &spectrum,
        sigma * sigma,
        cfg.beta,
        OracleMethod::NumericRoot,
    )?
    .lambda_q;
    let gcv_radius = sigma * radius(&eigenvalues(cfg.beta, cfg.n)?, lambda_beta, &cfg.radius)?;

    for &q in cfg.q_choices.iter().chain(qgrid.values()) {
        family.basis(q)?;
    }

    let reps = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let y1 = replicate_data(&f, &cfg.noise, cfg.seed, NOISE_STREAM, rep);
            let y2 = if cfg.independent_samples {
                replicate_data(&f, &cfg.noise, cfg.seed, SECOND_STREAM, rep)
            } else {
                y1.clone()
            };
            let mut arms = Vec::with_capacity(cfg.q_choices.len());
            for &q in &cfg.q_choices {
                let model = family.model(q)?;
                let lam =
                    select_lambda_gcv(model.eigen(), &model.forward(&y2)?, &cfg.gcv)?.lambda_f_hat;
                let center = model.smooth(&model.forward(&y1)?, lam)?;
                let diff: Vec<f64> = center.iter().zip(&f).map(|(a, b)| a - b).collect();
                arms.push((norm(&diff) <= gcv_radius, lam));
            }
            let eb = fit(&family, &y1, &qgrid, &FitOptions::default())?;
            Ok((arms, credible_ball(&eb, cfg.l, &cfg.radius)?.contains(&f)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let hits: Vec<usize> = (0..cfg.q_choices.len())
        .map(|j| reps.iter().filter(|r| r.0[j].0).count())
        .collect();
    let lambda_sum: Vec<f64> = (0..cfg.q_choices.len())
        .map(|j| reps.iter().map(|r| r.0[j].1).sum())
        .collect();
    let eb_hits = reps.iter().filter(|r| r.1).count();
    let m = cfg.replicates as f64;
    Ok(Theorem4Report {
        generator: cfg.generator.name(),
        n: cfg.n,
        replicates: cfg.replicates,
        beta: cfg.beta,
        lambda_beta,
        gcv_radius,
        coverage_eb_ball: eb_hits as f64 / m,
        rows: cfg
            .q_choices
            .iter()
            .enumerate()
            .map(|(j, &q)| Theorem4Row {
                q,
                coverage_gcv_ball: hits[j] as f64 / m,
                mean_lambda_f: lambda_sum[j] / m,
            })
            .collect(),
    })
}
