use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Dimension of the penalty null space for order `q`.
pub fn null_space_dim(q: f64) -> usize {
    q.floor().max(0.0) as usize
}

/// The scaled eigenvalues nη_{q,1..n} of the order-q penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSequence {
    q: f64,
    values: Vec<f64>,
}

fn check_order(q: f64, n: usize) -> Result<()> {
    if !q.is_finite() || q <= 0.5 {
        return Err(Error::InvalidArgument(format!(
            "order q must exceed 1/2, got {q}"
        )));
    }
    let d = null_space_dim(q);
    if n < 4 || n <= 2 * d {
        return Err(Error::InvalidArgument(format!(
            "n = {n} too small for order q = {q}"
        )));
    }
    Ok(())
}

/// Asymptotic eigenvalues: zero on the first ⌊q⌋ indices, π^{2q}(i − q)^{2q} beyond.
pub fn eigenvalues(q: f64, n: usize) -> Result<EigenSequence> {
    check_order(q, n)?;
    let d = null_space_dim(q);
    let values = (1..=n)
        .map(|i| {
            if i <= d {
                0.0
            } else {
                (PI * (i as f64 - q)).powf(2.0 * q)
            }
        })
        .collect();
    Ok(EigenSequence { q, values })
}

impl EigenSequence {
    /// Wraps externally computed eigenvalues (e.g. from a dense eigensolve).
    pub fn from_values(q: f64, values: Vec<f64>) -> Result<Self> {
        check_order(q, values.len())?;
        let d = null_space_dim(q);
        if values[..d].iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "null-space eigenvalues must be zero".into(),
            ));
        }
        if values[d..].iter().any(|&v| !(v > 0.0 && v.is_finite()))
            || values[d..].windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument(
                "eigenvalues beyond the null space must be positive and increasing".into(),
            ));
        }
        Ok(Self { q, values })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn null_dim(&self) -> usize {
        null_space_dim(self.q)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Eigenvalues beyond the null space.
    pub fn tail(&self) -> &[f64] {
        &self.values[self.null_dim()..]
    }

    /// Largest eigenvalue nη_{q,n}.
    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }
}

/// Smoother weights w_i = 1/(1 + λ nη_i).
///
/// `λ = 0` gives the interpolation limit and `λ = ∞` the null-space projection.
pub fn smoother_weights(eigen: &EigenSequence, lambda: f64) -> Result<Vec<f64>> {
    if lambda.is_nan() || lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "λ must be non-negative, got {lambda}"
        )));
    }
    Ok(eigen
        .values
        .iter()
        .map(|&e| {
            if e == 0.0 {
                1.0
            } else if lambda.is_infinite() {
                0.0
            } else {
                1.0 / (1.0 + lambda * e)
            }
        })
        .collect())
}
