//! Demmler-Reinsch spectral machinery: design grids, eigenvalue sequences,
//! orthonormal transforms and the diagonal smoother.

mod basis;
mod eigen;
mod exact;
mod grid;

use std::sync::Arc;

pub use basis::{make_basis, BasisHandle, BasisKind};
pub use eigen::{eigenvalues, null_space_dim, smoother_weights, EigenSequence};
pub use grid::{DesignConvention, DesignGrid};

use crate::error::{check_len, Error, Result};

/// Order q, its eigenvalue sequence and the transform Φ on a grid.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    grid: DesignGrid,
    q: f64,
    eigen: EigenSequence,
    basis: Arc<BasisHandle>,
}

impl SpectralModel {
    pub fn new(grid: &DesignGrid, q: f64, kind: BasisKind) -> Result<Self> {
        let basis = Arc::new(make_basis(grid, q, kind)?);
        Self::with_basis(grid, q, basis)
    }

    /// Pairs an existing basis with order `q`. The basis degree must be ⌊q⌋.
    pub fn with_basis(grid: &DesignGrid, q: f64, basis: Arc<BasisHandle>) -> Result<Self> {
        check_len(grid.len(), basis.len())?;
        if basis.degree() != null_space_dim(q) {
            return Err(Error::InvalidArgument(format!(
                "basis degree {} does not match order {q}",
                basis.degree()
            )));
        }
        let eigen = match basis.exact_eigenvalues() {
            Some(values) => EigenSequence::from_values(q, values.to_vec())?,
            None => eigenvalues(q, grid.len())?,
        };
        Ok(Self {
            grid: grid.clone(),
            q,
            eigen,
            basis,
        })
    }

    pub fn grid(&self) -> &DesignGrid {
        &self.grid
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn eigen(&self) -> &EigenSequence {
        &self.eigen
    }

    pub fn basis(&self) -> &BasisHandle {
        &self.basis
    }

    pub fn basis_arc(&self) -> Arc<BasisHandle> {
        Arc::clone(&self.basis)
    }

    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.basis.forward(y)
    }

    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.basis.inverse(coeffs)
    }

    /// Design-domain values of S_λ y given X = Φᵀy.
    pub fn smooth(&self, coeffs: &[f64], lambda: f64) -> Result<Vec<f64>> {
        check_len(self.n(), coeffs.len())?;
        let w = smoother_weights(&self.eigen, lambda)?;
        let shrunk: Vec<f64> = coeffs.iter().zip(&w).map(|(x, w)| x * w).collect();
        self.basis.inverse(&shrunk)
    }
}
