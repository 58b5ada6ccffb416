use serde::{Deserialize, Serialize};

use super::equations::{marginal_loglik, sigma2_hat, t_lambda, t_q, tail_energy};
use super::family::{CoefficientSet, ModelFamily, QGrid};
use crate::error::{check_len, Error, Result};
use crate::spectral::{EigenSequence, SpectralModel};

/// Lower end of the λ search interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LowerBound {
    /// 1/max(nη): the smallest λ at which any tail coefficient is shrunk by half.
    #[default]
    InverseMaxEigen,
    /// 1/n.
    InverseN,
    Fixed(f64),
}

/// Bracketing configuration for the λ root.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSearch {
    pub lower: LowerBound,
    pub upper: f64,
    pub grid_points: usize,
    pub max_iter: usize,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        Self {
            lower: LowerBound::InverseMaxEigen,
            upper: 1.0,
            grid_points: 64,
            max_iter: 200,
        }
    }
}

impl LambdaSearch {
    /// Search interval [lo, hi] for this spectrum.
    pub fn interval(&self, eigen: &EigenSequence) -> Result<(f64, f64)> {
        let lo = match self.lower {
            LowerBound::InverseMaxEigen => 1.0 / eigen.max(),
            LowerBound::InverseN => 1.0 / eigen.len() as f64,
            LowerBound::Fixed(v) => v,
        };
        if !(lo > 0.0 && lo.is_finite() && self.upper.is_finite() && self.upper > lo) {
            return Err(Error::InvalidArgument(format!(
                "invalid λ search interval [{lo}, {}]",
                self.upper
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::InvalidArgument(
                "λ search needs at least two grid points".into(),
            ));
        }
        Ok((lo, self.upper))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaSolution {
    pub lambda: f64,
    pub t_value: f64,
    pub boundary: Option<Boundary>,
    /// No energy beyond the null space.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Root of T_λ(·, q) in log λ.
///
/// Sign changes from negative to positive are local maxima of ℓ_n. With
/// several, the one with the largest ℓ_n wins. Without any, the endpoint
/// with smaller |T_λ| is returned and flagged.
pub fn solve_lambda(
    eigen: &EigenSequence,
    coeffs: &[f64],
    search: &LambdaSearch,
) -> Result<LambdaSolution> {
    check_len(eigen.len(), coeffs.len())?;
    let (lo, hi) = search.interval(eigen)?;
    let total: f64 = coeffs.iter().map(|x| x * x).sum();
    let tail = tail_energy(eigen, coeffs);
    if !(tail > 1e-24 * total) {
        return Ok(LambdaSolution {
            lambda: hi,
            t_value: 0.0,
            boundary: Some(Boundary::Upper),
            degenerate: true,
            iterations: 0,
        });
    }

    let (a, b) = (lo.ln(), hi.ln());
    let m = search.grid_points;
    let nodes: Vec<f64> = (0..m)
        .map(|k| a + (b - a) * k as f64 / (m - 1) as f64)
        .collect();
    let values = nodes
        .iter()
        .map(|&u| t_lambda(eigen, coeffs, u.exp()))
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(f64, LambdaSolution)> = None;
    for k in 0..m - 1 {
        if !(values[k] < 0.0 && values[k + 1] >= 0.0) {
            continue;
        }
        let (mut l, mut r) = (nodes[k], nodes[k + 1]);
        let mut iterations = 0;
        while r - l > 1e-13 && iterations < search.max_iter {
            let mid = 0.5 * (l + r);
            if t_lambda(eigen, coeffs, mid.exp())? < 0.0 {
                l = mid;
            } else {
                r = mid;
            }
            iterations += 1;
        }
        let lambda = (0.5 * (l + r)).exp();
        let sol = LambdaSolution {
            lambda,
            t_value: t_lambda(eigen, coeffs, lambda)?,
            boundary: None,
            degenerate: false,
            iterations,
        };
        let ll = marginal_loglik(eigen, coeffs, lambda)?;
        if best.as_ref().is_none_or(|(b, _)| ll > *b) {
            best = Some((ll, sol));
        }
    }
    if let Some((_, sol)) = best {
        return Ok(sol);
    }

    let (first, last) = (values[0], values[m - 1]);
    let (lambda, t_value, boundary) = if first.abs() <= last.abs() {
        (lo, first, Boundary::Lower)
    } else {
        (hi, last, Boundary::Upper)
    };
    Ok(LambdaSolution {
        lambda,
        t_value,
        boundary: Some(boundary),
        degenerate: false,
        iterations: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Rounding {
    /// Nearest integer to the interpolated crossing.
    #[default]
    Nearest,
    Raw,
}

/// How q̂ is chosen from the per-q diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// First negative-to-positive crossing of T_q(λ̂_q, q) over the grid.
    Crossing(Rounding),
    /// Grid maximiser of the profile marginal likelihood ℓ_n(λ̂_q, q).
    ProfileLikelihood,
}

impl Default for SelectionRule {
    fn default() -> Self {
        SelectionRule::ProfileLikelihood
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionFlag {
    /// T_q ≤ 0 on the whole grid.
    AllNonPositive,
    /// T_q > 0 on the whole grid; q̂ falls back to the smallest order.
    AllPositive,
    /// Mixed signs without a negative-to-positive crossing.
    NoCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QDiagnostic {
    pub q: f64,
    pub lambda_hat: f64,
    pub t_lambda: f64,
    pub t_q: f64,
    /// ℓ_n(λ̂_q, q); absent when the data lie in the null space.
    pub loglik: Option<f64>,
    pub boundary: Option<Boundary>,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSelection {
    pub q_hat: f64,
    /// Interpolated zero of T_q; equals q̂ when the grid has no crossing.
    pub q_star: f64,
    pub flag: Option<SelectionFlag>,
    pub rule: SelectionRule,
    pub per_q: Vec<QDiagnostic>,
}

fn diagnose(
    family: &ModelFamily,
    coeffs: &mut CoefficientSet,
    y: &[f64],
    q: f64,
    search: &LambdaSearch,
) -> Result<QDiagnostic> {
    let model = family.model(q)?;
    let x = coeffs.ensure(family, y, q)?;
    let eigen = model.eigen();
    let sol = solve_lambda(eigen, x, search)?;
    let (tq, loglik) = if sol.degenerate {
        (0.0, None)
    } else {
        (
            t_q(eigen, x, sol.lambda)?,
            Some(marginal_loglik(eigen, x, sol.lambda)?),
        )
    };
    Ok(QDiagnostic {
        q,
        lambda_hat: sol.lambda,
        t_lambda: sol.t_value,
        t_q: tq,
        loglik,
        boundary: sol.boundary,
        degenerate: sol.degenerate,
    })
}

/// Crossing q*, the crossing-rule q̂ and the flag, from per-q diagnostics.
fn crossing(
    per_q: &[QDiagnostic],
    scale: f64,
    rounding: Rounding,
) -> (f64, f64, Option<SelectionFlag>) {
    let tol = 1e-10 * scale;
    let t: Vec<f64> = per_q
        .iter()
        .map(|d| if d.t_q.abs() <= tol { 0.0 } else { d.t_q })
        .collect();
    let qs: Vec<f64> = per_q.iter().map(|d| d.q).collect();
    let (qmin, qmax) = (qs[0], qs[qs.len() - 1]);
    for k in 0..t.len().saturating_sub(1) {
        if t[k] <= 0.0 && t[k + 1] > 0.0 {
            let star = qs[k] + (qs[k + 1] - qs[k]) * (-t[k]) / (t[k + 1] - t[k]);
            let hat = match rounding {
                Rounding::Nearest => star
                    .round()
                    .clamp(qmin.ceil(), qmax.floor().max(qmin.ceil())),
                Rounding::Raw => star,
            };
            return (star, hat, None);
        }
    }
    if t.iter().all(|&v| v > 0.0) {
        (qmin, qmin, Some(SelectionFlag::AllPositive))
    } else if t.iter().all(|&v| v <= 0.0) {
        (qmax, qmax, Some(SelectionFlag::AllNonPositive))
    } else {
        (qmax, qmax, Some(SelectionFlag::NoCrossing))
    }
}

fn profile_argmax(per_q: &[QDiagnostic]) -> f64 {
    let score = |d: &QDiagnostic| d.loglik.unwrap_or(f64::INFINITY);
    let mut best = &per_q[0];
    for d in &per_q[1..] {
        if score(d) >= score(best) {
            best = d;
        }
    }
    best.q
}

/// λ̂_q and T_q(λ̂_q, q) over the grid, then q̂ under `rule`.
pub fn select_q(
    family: &ModelFamily,
    y: &[f64],
    qgrid: &QGrid,
    rule: SelectionRule,
    search: &LambdaSearch,
) -> Result<QSelection> {
    let (sel, _) = select_with_coeffs(family, y, qgrid, rule, search)?;
    Ok(sel)
}

fn select_with_coeffs(
    family: &ModelFamily,
    y: &[f64],
    qgrid: &QGrid,
    rule: SelectionRule,
    search: &LambdaSearch,
) -> Result<(QSelection, CoefficientSet)> {
    if qgrid.is_empty() {
        return Err(Error::InvalidArgument("q grid is empty".into()));
    }
    let mut coeffs = family.coefficients(y, qgrid)?;
    let per_q = qgrid
        .values()
        .iter()
        .map(|&q| diagnose(family, &mut coeffs, y, q, search))
        .collect::<Result<Vec<_>>>()?;
    let scale = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
    let rounding = match rule {
        SelectionRule::Crossing(r) => r,
        SelectionRule::ProfileLikelihood => Rounding::Raw,
    };
    let (q_star, crossing_hat, flag) = crossing(&per_q, scale, rounding);
    let q_hat = match rule {
        SelectionRule::Crossing(_) => crossing_hat,
        SelectionRule::ProfileLikelihood => profile_argmax(&per_q),
    };
    Ok((
        QSelection {
            q_hat,
            q_star,
            flag,
            rule,
            per_q,
        },
        coeffs,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitOptions {
    pub rule: SelectionRule,
    pub search: LambdaSearch,
    /// Skips the λ solve at q̂; 0 and ∞ are accepted.
    pub lambda_override: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub model: SpectralModel,
    pub lambda_hat: f64,
    pub q_hat: f64,
    pub q_star: f64,
    pub fitted: Vec<f64>,
    pub sigma2_hat: f64,
    /// X = Φᵀy for the basis of degree ⌊q̂⌋.
    pub coeffs: Vec<f64>,
    pub diagnostics: Vec<QDiagnostic>,
    pub boundary: Option<Boundary>,
    pub flag: Option<SelectionFlag>,
    pub degenerate: bool,
}

impl FitResult {
    /// Shrinkage weights 1/(1 + λ̂nη) of the selected model.
    pub fn weights(&self) -> Vec<f64> {
        crate::spectral::smoother_weights(self.model.eigen(), self.lambda_hat)
            .expect("λ̂ validated at fit time")
    }
}

/// Adaptive fit: q̂ from the grid, λ̂ = λ̂_{q̂}, f̂ = S_{λ̂,q̂} y.
pub fn fit(family: &ModelFamily, y: &[f64], qgrid: &QGrid, opts: &FitOptions) -> Result<FitResult> {
    let n = family.n();
    if n < 8 {
        return Err(Error::InvalidArgument(format!("fit needs n ≥ 8, got {n}")));
    }
    if let Some(l) = opts.lambda_override {
        if l.is_nan() || l < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "λ override must be non-negative, got {l}"
            )));
        }
    }
    let (sel, mut coeffs) = select_with_coeffs(family, y, qgrid, opts.rule, &opts.search)?;
    let model = family.model(sel.q_hat)?;
    let x = coeffs.ensure(family, y, sel.q_hat)?.to_vec();
    let (lambda_hat, boundary, degenerate) = match opts.lambda_override {
        Some(l) => (l, None, false),
        None => match sel.per_q.iter().find(|d| d.q == sel.q_hat) {
            Some(d) => (d.lambda_hat, d.boundary, d.degenerate),
            None => {
                let s = solve_lambda(model.eigen(), &x, &opts.search)?;
                (s.lambda, s.boundary, s.degenerate)
            }
        },
    };
    let fitted = model.smooth(&x, lambda_hat)?;
    let sigma2 = sigma2_hat(model.eigen(), &x, lambda_hat)?;
    Ok(FitResult {
        model,
        lambda_hat,
        q_hat: sel.q_hat,
        q_star: sel.q_star,
        fitted,
        sigma2_hat: sigma2,
        coeffs: x,
        diagnostics: sel.per_q,
        boundary,
        flag: sel.flag,
        degenerate,
    })
}

/// Fit at a fixed order q with λ̂_q from the marginal likelihood.
pub fn fit_fixed_q(
    family: &ModelFamily,
    y: &[f64],
    q: f64,
    search: &LambdaSearch,
) -> Result<FitResult> {
    let grid = QGrid::new(vec![q])?;
    fit(
        family,
        y,
        &grid,
        &FitOptions {
            search: *search,
            ..FitOptions::default()
        },
    )
}
