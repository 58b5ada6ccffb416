use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectral::EigenSequence;

/// Prior hyperparameters (λ, q, a, b) of the partially informative
/// normal-inverse-gamma prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub lambda: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
}

impl HyperParams {
    /// Defaults a = q/2, b = 0.
    pub fn new(lambda: f64, q: f64) -> Result<Self> {
        Self::with_prior(lambda, q, q / 2.0, 0.0)
    }

    pub fn with_prior(lambda: f64, q: f64, a: f64, b: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "λ must be positive, got {lambda}"
            )));
        }
        if !(q > 0.5 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "q must exceed 1/2, got {q}"
            )));
        }
        if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(
                "a and b must be non-negative".into(),
            ));
        }
        Ok(Self { lambda, q, a, b })
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "λ must be positive and finite, got {lambda}"
        )))
    }
}

/// Σ_{i>⌊q⌋} X_i².
pub fn tail_energy(eigen: &EigenSequence, coeffs: &[f64]) -> f64 {
    coeffs[eigen.null_dim()..].iter().map(|x| x * x).sum()
}

/// Residual form Yᵀ(I − S)Y and the two sums shared by the estimating equations.
struct Sums {
    rss: f64,
    weighted: f64,
    trace: f64,
}

fn sums(eigen: &EigenSequence, coeffs: &[f64], lambda: f64, log_weights: bool) -> Sums {
    let d = eigen.null_dim();
    let mut s = Sums {
        rss: 0.0,
        weighted: 0.0,
        trace: 0.0,
    };
    for (&e, &x) in eigen.values()[d..].iter().zip(&coeffs[d..]) {
        let t = lambda * e;
        let w = 1.0 / (1.0 + t);
        let x2 = x * x;
        let g = if log_weights { e.ln() } else { 1.0 };
        s.rss += x2 * t * w;
        s.weighted += x2 * t * w * w * g;
        s.trace += w * g;
    }
    s
}

/// ℓ_n(λ, q) with the default prior a = q/2, b = 0, up to an additive constant.
pub fn marginal_loglik(eigen: &EigenSequence, coeffs: &[f64], lambda: f64) -> Result<f64> {
    let q = eigen.q();
    marginal_loglik_with(eigen, coeffs, &HyperParams::new(lambda, q)?)
}

/// ℓ_n for general (a, b):
/// −(a + (n − q)/2)·log{Yᵀ(I − S)Y + 2b} + ½ log|I − S|₊.
pub fn marginal_loglik_with(
    eigen: &EigenSequence,
    coeffs: &[f64],
    hp: &HyperParams,
) -> Result<f64> {
    check_len(eigen.len(), coeffs.len())?;
    check_lambda(hp.lambda)?;
    let d = eigen.null_dim();
    let n = eigen.len() as f64;
    let mut rss = 0.0;
    let mut logdet = 0.0;
    for (&e, &x) in eigen.values()[d..].iter().zip(&coeffs[d..]) {
        let t = hp.lambda * e;
        rss += x * x * t / (1.0 + t);
        logdet += (t / (1.0 + t)).ln();
    }
    let form = rss + 2.0 * hp.b;
    if !(form > 0.0) || !form.is_finite() {
        return Err(Error::DegenerateInput(
            "residual quadratic form is not positive".into(),
        ));
    }
    Ok(-(hp.a + (n - hp.q) / 2.0) * form.ln() + 0.5 * logdet)
}

/// T_λ(λ, q) = (1/n)Σ X²t/(1+t)² − (1/n²)(Σ X²t/(1+t))(Σ 1/(1+t)), t = λnη, over i > ⌊q⌋.
pub fn t_lambda(eigen: &EigenSequence, coeffs: &[f64], lambda: f64) -> Result<f64> {
    check_len(eigen.len(), coeffs.len())?;
    check_lambda(lambda)?;
    let n = eigen.len() as f64;
    let s = sums(eigen, coeffs, lambda, false);
    Ok(s.weighted / n - s.rss * s.trace / (n * n))
}

/// T_q(λ, q): T_λ with log(nη) weights, dropping the ∂X²/∂q contribution.
pub fn t_q(eigen: &EigenSequence, coeffs: &[f64], lambda: f64) -> Result<f64> {
    check_len(eigen.len(), coeffs.len())?;
    check_lambda(lambda)?;
    let n = eigen.len() as f64;
    let s = sums(eigen, coeffs, lambda, true);
    let rss = sums(eigen, coeffs, lambda, false).rss;
    Ok(s.weighted / n - rss * s.trace / (n * n))
}

/// σ̂² = (1/n)Σ_{i>⌊q⌋} X² λnη/(1 + λnη); λ = ∞ gives the null-space residual.
pub fn sigma2_hat(eigen: &EigenSequence, coeffs: &[f64], lambda: f64) -> Result<f64> {
    check_len(eigen.len(), coeffs.len())?;
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "λ must be non-negative, got {lambda}"
        )));
    }
    let n = eigen.len() as f64;
    if lambda.is_infinite() {
        return Ok(tail_energy(eigen, coeffs) / n);
    }
    let d = eigen.null_dim();
    Ok(eigen.values()[d..]
        .iter()
        .zip(&coeffs[d..])
        .map(|(&e, &x)| {
            let t = lambda * e;
            x * x * t / (1.0 + t)
        })
        .sum::<f64>()
        / n)
}
