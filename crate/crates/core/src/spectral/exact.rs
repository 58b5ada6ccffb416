//! Dense eigendecomposition of the finite-difference penalty, used as a test oracle.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(super) const MAX_N: usize = 512;

/// Eigenvectors (ascending eigenvalue order) and eigenvalues of n^{2q} DᵀD,
/// with D the order-q forward difference operator.
pub(super) fn penalty_eigen(n: usize, q: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let mut coef = vec![1.0f64];
    for _ in 0..q {
        let mut next = vec![0.0; coef.len() + 1];
        for (k, c) in coef.iter().enumerate() {
            next[k + 1] += c;
            next[k] -= c;
        }
        coef = next;
    }
    let mut d = DMatrix::<f64>::zeros(n - q, n);
    for r in 0..n - q {
        for (k, c) in coef.iter().enumerate() {
            d[(r, r + k)] = *c;
        }
    }
    let scale = (n as f64).powi(2 * q as i32);
    let mut k = d.transpose() * &d * scale;
    k = (&k + k.transpose()) * 0.5;

    let eig = SymmetricEigen::new(k);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut phi = DMatrix::<f64>::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (j, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = if col[0].abs() > 1e-8 {
            col[0]
        } else {
            col.iter()
                .copied()
                .max_by(|a, b| a.abs().total_cmp(&b.abs()))
                .unwrap_or(1.0)
        };
        if pivot < 0.0 {
            col.neg_mut();
        }
        phi.set_column(j, &col);
        values.push(if j < q { 0.0 } else { eig.eigenvalues[src] });
    }
    if values[q..].iter().any(|&v| v <= 0.0) || values[q..].windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Numerical(
            "penalty spectrum is not strictly positive beyond the null space".into(),
        ));
    }
    Ok((phi, values))
}
