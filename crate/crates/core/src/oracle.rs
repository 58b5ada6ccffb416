//! Closed-form constants and oracle quantities: κ_q(m,l), trace
//! approximations, expected estimating equations, the oracle λ_q,
//! polished-tail diagnostics and asymptotic variance constants.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spectral::{eigenvalues, EigenSequence};

fn check_q(q: f64) -> Result<()> {
    if q > 0.5 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("q must exceed 1/2, got {q}")))
    }
}

/// κ_q(m,l) = Γ(m + 1/(2q)) Γ(l − 1/(2q)) / (2πq Γ(l + m)), evaluated in log space.
pub fn kappa(q: f64, m: u32, l: u32) -> Result<f64> {
    check_q(q)?;
    if l == 0 {
        return Err(Error::Domain("κ_q(m, l) needs l ≥ 1".into()));
    }
    let a = 1.0 / (2.0 * q);
    let (m, l) = (f64::from(m), f64::from(l));
    Ok((ln_gamma(m + a) + ln_gamma(l - a) - ln_gamma(l + m)).exp() / (2.0 * PI * q))
}

/// κ_q(0,1) through the reflection formula: 1/(2q sin(π/(2q))).
pub fn kappa_reflection(q: f64) -> Result<f64> {
    check_q(q)?;
    Ok(1.0 / (2.0 * q * (PI / (2.0 * q)).sin()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaEntry {
    pub m: u32,
    pub l: u32,
    pub value: f64,
}

/// κ_q(m,l) for 0 ≤ m ≤ m_max, 1 ≤ l ≤ l_max.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaTable {
    pub q: f64,
    pub entries: Vec<KappaEntry>,
}

impl KappaTable {
    pub fn new(q: f64, m_max: u32, l_max: u32) -> Result<Self> {
        let mut entries = Vec::new();
        for m in 0..=m_max {
            for l in 1..=l_max {
                entries.push(KappaEntry {
                    m,
                    l,
                    value: kappa(q, m, l)?,
                });
            }
        }
        Ok(Self { q, entries })
    }

    pub fn get(&self, m: u32, l: u32) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.m == m && e.l == l)
            .map(|e| e.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub exact: f64,
    pub approx: f64,
    pub rel_err: f64,
}

/// tr{(I − S)^m S^l} = Σ_i t^m/(1+t)^{m+l}, t = λnη_i, over all n indices.
pub fn trace_exact(eigen: &EigenSequence, lambda: f64, m: u32, l: u32) -> f64 {
    let (m, l) = (m as i32, l as i32);
    eigen
        .values()
        .iter()
        .map(|&e| {
            let t = lambda * e;
            let s = 1.0 / (1.0 + t);
            (t * s).powi(m) * s.powi(l)
        })
        .sum()
}

/// Direct trace against λ^{−1/(2q)} κ_q(m,l).
pub fn trace_approx_check(q: f64, lambda: f64, n: usize, m: u32, l: u32) -> Result<TraceCheck> {
    trace_log_check(q, lambda, n, m, l, 0)
}

/// Log-weighted trace Σ_{i>⌊q⌋} t^m {log nη_i}^r/(1+t)^{m+l} against
/// λ^{−1/(2q)} {log(1/λ)}^r κ_q(m,l). With r = 0 the sum runs over all indices.
pub fn trace_log_check(
    q: f64,
    lambda: f64,
    n: usize,
    m: u32,
    l: u32,
    r: u32,
) -> Result<TraceCheck> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    let eigen = eigenvalues(q, n)?;
    let exact = if r == 0 {
        trace_exact(&eigen, lambda, m, l)
    } else {
        let (mi, li, ri) = (m as i32, l as i32, r as i32);
        eigen
            .tail()
            .iter()
            .map(|&e| {
                let t = lambda * e;
                let s = 1.0 / (1.0 + t);
                (t * s).powi(mi) * s.powi(li) * e.ln().powi(ri)
            })
            .sum()
    };
    let approx =
        lambda.powf(-1.0 / (2.0 * q)) * (1.0 / lambda).ln().powi(r as i32) * kappa(q, m, l)?;
    Ok(TraceCheck {
        exact,
        approx,
        rel_err: (exact - approx).abs() / approx.abs(),
    })
}

/// Noiseless spectral coefficients B = Φᵀf.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpectrum {
    pub b: Vec<f64>,
    /// Smoothness of the generator, if known.
    pub beta_nominal: Option<f64>,
    /// Sobolev radius bound, diagnostic only.
    pub radius: Option<f64>,
}

impl SignalSpectrum {
    pub fn new(b: Vec<f64>) -> Self {
        Self {
            b,
            beta_nominal: None,
            radius: None,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta_nominal = Some(beta);
        self
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = Some(radius);
        self
    }

    pub fn n(&self) -> usize {
        self.b.len()
    }

    /// (1/n)Σ B_i² nη_{q,i}, the spectral estimate of ‖f^{(q)}‖².
    pub fn sobolev_energy(&self, q: f64) -> Result<f64> {
        let eigen = eigenvalues(q, self.n())?;
        Ok(energy(&eigen, &self.b))
    }

    /// Whether the nominal-order energy stays within M², when both are set.
    pub fn within_radius(&self) -> Result<Option<bool>> {
        match (self.beta_nominal, self.radius) {
            (Some(beta), Some(m)) => Ok(Some(self.sobolev_energy(beta)? <= m * m)),
            _ => Ok(None),
        }
    }
}

fn energy(eigen: &EigenSequence, b: &[f64]) -> f64 {
    eigen
        .values()
        .iter()
        .zip(b)
        .map(|(e, b)| b * b * e)
        .sum::<f64>()
        / eigen.len() as f64
}

fn check_spectrum(spectrum: &SignalSpectrum, sigma2: f64, lambda: f64) -> Result<()> {
    if !(sigma2 >= 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "σ² must be non-negative, got {sigma2}"
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "λ must be positive, got {lambda}"
        )));
    }
    if spectrum.b.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("spectrum must be finite".into()));
    }
    Ok(())
}

fn expected_t_lambda_at(eigen: &EigenSequence, b: &[f64], sigma2: f64, lambda: f64) -> f64 {
    let d = eigen.null_dim();
    let s: f64 = eigen.values()[d..]
        .iter()
        .zip(&b[d..])
        .map(|(&e, &b)| {
            let t = lambda * e;
            let w = 1.0 / (1.0 + t);
            (b * b * t - sigma2) * w * w
        })
        .sum();
    s / eigen.len() as f64
}

/// E T_λ = (1/n){Σ B²t/(1+t)² − Σ σ²/(1+t)²}, t = λnη, over i > ⌊q⌋.
pub fn expected_t_lambda(
    spectrum: &SignalSpectrum,
    sigma2: f64,
    lambda: f64,
    q: f64,
) -> Result<f64> {
    check_spectrum(spectrum, sigma2, lambda)?;
    let eigen = eigenvalues(q, spectrum.n())?;
    Ok(expected_t_lambda_at(&eigen, &spectrum.b, sigma2, lambda))
}

fn quadratic_form_at(eigen: &EigenSequence, b: &[f64], lambda: f64) -> f64 {
    let d = eigen.null_dim();
    let s: f64 = eigen.values()[d..]
        .iter()
        .zip(&b[d..])
        .map(|(&e, &b)| {
            let t = lambda * e;
            b * b * t * t.ln() / ((1.0 + t) * (1.0 + t))
        })
        .sum();
    s / eigen.len() as f64
}

/// E T_q = (1/n)Σ B² t log t/(1+t)² + log(1/λ)·E T_λ.
pub fn expected_t_q(spectrum: &SignalSpectrum, sigma2: f64, lambda: f64, q: f64) -> Result<f64> {
    check_spectrum(spectrum, sigma2, lambda)?;
    let eigen = eigenvalues(q, spectrum.n())?;
    Ok(quadratic_form_at(&eigen, &spectrum.b, lambda)
        + (1.0 / lambda).ln() * expected_t_lambda_at(&eigen, &spectrum.b, sigma2, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    /// [n‖f^{(q)}‖²/(σ²κ_q(0,2))]^{−2q/(2q+1)}.
    ClosedForm,
    /// Zero of E T_λ by bisection in log λ.
    NumericRoot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// ∞ when f lies in the null space of the order-q penalty.
    pub lambda_q: f64,
    /// Interpolated sign change of E T_q(λ_q, q) over a q grid, when computed.
    pub beta_bar_estimate: Option<f64>,
    pub method: OracleMethod,
}

/// Oracle λ_q.
pub fn oracle_lambda(
    spectrum: &SignalSpectrum,
    sigma2: f64,
    q: f64,
    method: OracleMethod,
) -> Result<OracleResult> {
    check_spectrum(spectrum, sigma2, 1.0)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("oracle λ needs σ² > 0".into()));
    }
    let eigen = eigenvalues(q, spectrum.n())?;
    let lambda_q = oracle_lambda_at(&eigen, &spectrum.b, sigma2, method)?;
    Ok(OracleResult {
        lambda_q,
        beta_bar_estimate: None,
        method,
    })
}

fn oracle_lambda_at(
    eigen: &EigenSequence,
    b: &[f64],
    sigma2: f64,
    method: OracleMethod,
) -> Result<f64> {
    let d = eigen.null_dim();
    let tail: f64 = b[d..].iter().map(|v| v * v).sum();
    let total: f64 = b.iter().map(|v| v * v).sum();
    if !(tail > 1e-24 * total) {
        return Ok(f64::INFINITY);
    }
    let q = eigen.q();
    let n = eigen.len() as f64;
    match method {
        OracleMethod::ClosedForm => {
            let norm = energy(eigen, b);
            Ok((n * norm / (sigma2 * kappa(q, 0, 2)?)).powf(-2.0 * q / (2.0 * q + 1.0)))
        }
        OracleMethod::NumericRoot => {
            let g = |u: f64| expected_t_lambda_at(eigen, b, sigma2, u.exp());
            let (mut lo, mut hi) = ((1.0 / eigen.max()).ln(), 0.0f64);
            while g(lo) >= 0.0 {
                lo -= 10.0;
                if lo < -700.0 {
                    return Err(Error::Numerical(
                        "cannot bracket the oracle λ from below".into(),
                    ));
                }
            }
            while g(hi) < 0.0 {
                hi += 10.0;
                if hi > 700.0 {
                    return Err(Error::Numerical(
                        "cannot bracket the oracle λ from above".into(),
                    ));
                }
            }
            for _ in 0..200 {
                if hi - lo <= 1e-13 {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if g(mid) < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok((0.5 * (lo + hi)).exp())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOrder {
    pub q: f64,
    pub lambda_q: f64,
    /// E T_q(λ_q, q) as displayed; 0 when λ_q = ∞.
    pub t_q: f64,
    /// E T_q(λ_q, q) keeping the noise log-term.
    pub t_q_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OraclePath {
    pub orders: Vec<OracleOrder>,
    /// First negative-to-positive crossing of `t_q`, linearly interpolated.
    pub beta_bar: Option<f64>,
    /// Same for `t_q_noise`.
    pub beta_bar_noise: Option<f64>,
}

fn first_crossing(qs: &[f64], t: &[f64]) -> Option<f64> {
    (0..t.len().saturating_sub(1))
        .find(|&k| t[k] <= 0.0 && t[k + 1] > 0.0)
        .map(|k| qs[k] + (qs[k + 1] - qs[k]) * (-t[k]) / (t[k + 1] - t[k]))
}

fn noise_log_term(eigen: &EigenSequence, sigma2: f64, lambda: f64) -> f64 {
    let s: f64 = eigen
        .tail()
        .iter()
        .map(|&e| {
            let t = lambda * e;
            t.ln() / ((1.0 + t) * (1.0 + t))
        })
        .sum();
    -sigma2 * s / eigen.len() as f64
}

/// E T_q with the noise contribution −(σ²/n)Σ log t/(1+t)² kept.
pub fn expected_t_q_with_noise(
    spectrum: &SignalSpectrum,
    sigma2: f64,
    lambda: f64,
    q: f64,
) -> Result<f64> {
    check_spectrum(spectrum, sigma2, lambda)?;
    let eigen = eigenvalues(q, spectrum.n())?;
    Ok(quadratic_form_at(&eigen, &spectrum.b, lambda)
        + noise_log_term(&eigen, sigma2, lambda)
        + (1.0 / lambda).ln() * expected_t_lambda_at(&eigen, &spectrum.b, sigma2, lambda))
}

/// Oracle (λ_q, E T_q(λ_q, q)) along `qs` and the interpolated sign changes.
pub fn oracle_path(spectrum: &SignalSpectrum, sigma2: f64, qs: &[f64]) -> Result<OraclePath> {
    check_spectrum(spectrum, sigma2, 1.0)?;
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("oracle λ needs σ² > 0".into()));
    }
    let mut orders = Vec::with_capacity(qs.len());
    for &q in qs {
        let eigen = eigenvalues(q, spectrum.n())?;
        let lambda_q = oracle_lambda_at(&eigen, &spectrum.b, sigma2, OracleMethod::NumericRoot)?;
        let (t_q, t_q_noise) = if lambda_q.is_finite() {
            let base = quadratic_form_at(&eigen, &spectrum.b, lambda_q);
            (base, base + noise_log_term(&eigen, sigma2, lambda_q))
        } else {
            (0.0, 0.0)
        };
        orders.push(OracleOrder {
            q,
            lambda_q,
            t_q,
            t_q_noise,
        });
    }
    let t: Vec<f64> = orders.iter().map(|o| o.t_q).collect();
    let tn: Vec<f64> = orders.iter().map(|o| o.t_q_noise).collect();
    Ok(OraclePath {
        beta_bar: first_crossing(qs, &t),
        beta_bar_noise: first_crossing(qs, &tn),
        orders,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolishedTail {
    pub holds: bool,
    pub worst_j: usize,
    /// max_j Σ_{i≥j} B_i² / Σ_{j≤i≤ρj} B_i²; ∞ when a block is empty but its tail is not.
    pub worst_ratio: f64,
}

/// Polished-tail condition Σ_{i=j}^n B_i² ≤ L Σ_{i=j}^{ρj} B_i² for N ≤ j ≤ n/ρ (1-based i).
pub fn polished_tail_check(b: &[f64], l: f64, n_min: usize, rho: f64) -> Result<PolishedTail> {
    let n = b.len();
    if !(rho >= 2.0) || !(l > 0.0) || n_min == 0 {
        return Err(Error::InvalidArgument(
            "polished-tail check needs L > 0, N ≥ 1, ρ ≥ 2".into(),
        ));
    }
    let j_max = (n as f64 / rho).floor() as usize;
    if n_min > j_max {
        return Err(Error::InvalidArgument(format!(
            "N = {n_min} exceeds n/ρ = {j_max}"
        )));
    }
    let mut suffix = vec![0.0; n + 2];
    for i in (1..=n).rev() {
        suffix[i] = suffix[i + 1] + b[i - 1] * b[i - 1];
    }
    let mut worst = PolishedTail {
        holds: true,
        worst_j: n_min,
        worst_ratio: 0.0,
    };
    for j in n_min..=j_max {
        let end = ((rho * j as f64).floor() as usize).min(n);
        let tail = suffix[j];
        let block = suffix[j] - suffix[end + 1];
        let ratio = if tail == 0.0 {
            0.0
        } else if block <= 0.0 {
            f64::INFINITY
        } else {
            tail / block
        };
        if ratio > worst.worst_ratio {
            worst.worst_ratio = ratio;
            worst.worst_j = j;
        }
    }
    worst.holds = worst.worst_ratio <= l;
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticVariances {
    pub eb: f64,
    pub gcv: f64,
    /// gcv / eb.
    pub ratio: f64,
}

/// Scaled asymptotic variances of λ̂/λ − 1 for the marginal-likelihood and GCV selectors.
pub fn asymptotic_variances(q: f64) -> Result<AsymptoticVariances> {
    let k = |m, l| kappa(q, m, l);
    let eb = 2.0 * k(2, 2)? / (3.0 * k(0, 2)? - 2.0 * k(0, 3)?).powi(2);
    let gcv = 2.0 * k(4, 2)? / (4.0 * k(1, 2)? - 3.0 * k(1, 3)?).powi(2);
    Ok(AsymptoticVariances {
        eb,
        gcv,
        ratio: gcv / eb,
    })
}
