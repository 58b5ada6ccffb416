use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::credible::{replicate_data, NOISE_STREAM};
use crate::ebcore::{fit, fit_fixed_q, FitOptions, ModelFamily, QGrid, SelectionRule};
use crate::error::{Error, Result};
use crate::freq::{gcv_fit, GcvOptions};
use crate::spectral::{DesignConvention, DesignGrid};

use super::{Generator, NoiseModel};

/// An estimator compared in a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Method {
    /// Adaptive EB: λ̂ at q̂.
    Eb,
    /// EB λ̂_q at a fixed order.
    EbFixed { q: f64 },
    /// GCV λ̂_f at a fixed order.
    Gcv { q: f64 },
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Eb => "EB".into(),
            Method::EbFixed { q } => format!("EB q={q}"),
            Method::Gcv { q } => format!("GCV q={q}"),
        }
    }
}

/// Omitted JSON keys take the values of [`StudyConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub generator: Generator,
    pub n: usize,
    #[serde(rename = "M", default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_q_grid")]
    pub q_grid: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(rename = "design_convention", default = "default_design")]
    pub design: DesignConvention,
    #[serde(default)]
    pub rule: SelectionRule,
    #[serde(default)]
    pub gcv: GcvOptions,
}

fn default_replicates() -> usize {
    200
}

fn default_sigma() -> f64 {
    NoiseModel::default().sigma
}

fn default_q_grid() -> Vec<f64> {
    QGrid::default_integer().values().to_vec()
}

fn default_methods() -> Vec<Method> {
    let qs = [2.0, 3.0, 4.0, 5.0, 6.0];
    let mut methods = vec![Method::Eb];
    methods.extend(qs.iter().map(|&q| Method::Gcv { q }));
    methods.extend(qs.iter().map(|&q| Method::EbFixed { q }));
    methods
}

fn default_seed() -> u64 {
    1
}

fn default_design() -> DesignConvention {
    DesignConvention::Right
}

impl StudyConfig {
    /// EB, GCV at q = 2..6 and EB at q = 2..6 with M = 200, σ = 0.01.
    pub fn new(generator: Generator, n: usize) -> Self {
        Self {
            generator,
            n,
            replicates: default_replicates(),
            sigma: default_sigma(),
            q_grid: default_q_grid(),
            methods: default_methods(),
            seed: default_seed(),
            design: default_design(),
            rule: SelectionRule::default(),
            gcv: GcvOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub label: String,
    pub mean_lambda: f64,
    pub var_lambda: f64,
    pub amse: f64,
    /// A(method) / A(EB); present when the adaptive EB arm is run.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub q: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub config: StudyConfig,
    pub generator: String,
    pub rows: Vec<MethodRow>,
    /// Counts of q̂ over the grid; empty without the adaptive EB arm.
    pub q_hat_histogram: Vec<HistogramBin>,
    /// λ̂ per replicate, one vector per method.
    pub lambdas: Vec<Vec<f64>>,
}

impl SimulationReport {
    pub fn row(&self, method: Method) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    /// Share of replicates with q̂ = q.
    pub fn q_hat_fraction(&self, q: f64) -> f64 {
        let total: usize = self.q_hat_histogram.iter().map(|b| b.count).sum();
        let hit = self
            .q_hat_histogram
            .iter()
            .find(|b| b.q == q)
            .map_or(0, |b| b.count);
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }

    /// Columns: EB then GCV by q; rows mean(λ̂), var(λ̂), A(λ̂), R.
    pub fn table_csv(&self) -> String {
        let cols: Vec<&MethodRow> = self
            .rows
            .iter()
            .filter(|r| matches!(r.method, Method::Eb | Method::Gcv { .. }))
            .collect();
        let mut out = String::from("function,statistic");
        for c in &cols {
            let _ = write!(out, ",{}", c.label);
        }
        out.push('\n');
        let stats: [(&str, fn(&MethodRow) -> Option<f64>); 4] = [
            ("mean(lambda)", |r| Some(r.mean_lambda)),
            ("var(lambda)", |r| Some(r.var_lambda)),
            ("A(lambda)", |r| Some(r.amse)),
            ("R", |r| match r.method {
                Method::Eb => None,
                _ => r.ratio,
            }),
        ];
        for (name, get) in stats {
            let _ = write!(out, "{},{}", self.generator, name);
            for c in &cols {
                match get(c) {
                    Some(v) => {
                        let _ = write!(out, ",{v:e}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

struct Replicate {
    lambdas: Vec<f64>,
    sq_errors: Vec<f64>,
    q_hat: Option<f64>,
}

fn sq_error(fit: &[f64], f: &[f64]) -> f64 {
    fit.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Monte-Carlo comparison of the configured methods on one generator.
pub fn run_study(cfg: &StudyConfig) -> Result<SimulationReport> {
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if cfg.methods.is_empty() {
        return Err(Error::InvalidArgument("no methods configured".into()));
    }
    let noise = NoiseModel::new(cfg.sigma)?;
    let grid = DesignGrid::new(cfg.n, cfg.design)?;
    let family = ModelFamily::analytic(grid.clone());
    let qgrid = QGrid::new(cfg.q_grid.clone())?;
    let f = cfg.generator.generate(&grid)?;
    let fit_opts = FitOptions {
        rule: cfg.rule,
        ..FitOptions::default()
    };
    for &q in qgrid.values() {
        family.basis(q)?;
    }
    for m in &cfg.methods {
        if let Method::EbFixed { q } | Method::Gcv { q } = m {
            family.basis(*q)?;
        }
    }

    let reps = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|rep| {
            let y = replicate_data(&f, &noise, cfg.seed, NOISE_STREAM, rep);
            let mut out = Replicate {
                lambdas: vec![],
                sq_errors: vec![],
                q_hat: None,
            };
            for m in &cfg.methods {
                let (lam, fitted) = match *m {
                    Method::Eb => {
                        let r = fit(&family, &y, &qgrid, &fit_opts)?;
                        out.q_hat = Some(r.q_hat);
                        (r.lambda_hat, r.fitted)
                    }
                    Method::EbFixed { q } => {
                        let r = fit_fixed_q(&family, &y, q, &fit_opts.search)?;
                        (r.lambda_hat, r.fitted)
                    }
                    Method::Gcv { q } => {
                        let (r, fitted) = gcv_fit(&family, &y, q, &cfg.gcv)?;
                        (r.lambda_f_hat, fitted)
                    }
                };
                out.lambdas.push(lam);
                out.sq_errors.push(sq_error(&fitted, &f));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    let m = cfg.replicates as f64;
    let n = cfg.n as f64;
    let lambdas: Vec<Vec<f64>> = (0..cfg.methods.len())
        .map(|j| reps.iter().map(|r| r.lambdas[j]).collect())
        .collect();
    let amse: Vec<f64> = (0..cfg.methods.len())
        .map(|j| reps.iter().map(|r| r.sq_errors[j]).sum::<f64>() / (m * n))
        .collect();
    let eb_amse = cfg
        .methods
        .iter()
        .position(|x| *x == Method::Eb)
        .map(|j| amse[j]);
    let rows = cfg
        .methods
        .iter()
        .enumerate()
        .map(|(j, &method)| {
            let l = &lambdas[j];
            let mean = l.iter().sum::<f64>() / m;
            let var = if l.len() > 1 {
                l.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
            } else {
                0.0
            };
            MethodRow {
                method,
                label: method.label(),
                mean_lambda: mean,
                var_lambda: var,
                amse: amse[j],
                ratio: eb_amse.map(|a| amse[j] / a),
            }
        })
        .collect();
    let q_hat_histogram = if eb_amse.is_some() {
        qgrid
            .values()
            .iter()
            .map(|&q| HistogramBin {
                q,
                count: reps.iter().filter(|r| r.q_hat == Some(q)).count(),
            })
            .collect()
    } else {
        vec![]
    };
    Ok(SimulationReport {
        config: cfg.clone(),
        generator: cfg.generator.name(),
        rows,
        q_hat_histogram,
        lambdas,
    })
}
