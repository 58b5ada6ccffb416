use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::spectral::{
    make_basis, null_space_dim, BasisHandle, BasisKind, DesignGrid, SpectralModel,
};

/// Increasing grid of candidate orders 𝑸_n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QGrid {
    values: Vec<f64>,
}

impl QGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("q grid is empty".into()));
        }
        if values.iter().any(|q| !q.is_finite()) || values[0] <= 0.5 {
            return Err(Error::InvalidArgument(
                "q grid values must be finite and exceed 1/2".into(),
            ));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "q grid must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    /// {1, 2, …, 6}.
    pub fn default_integer() -> Self {
        Self::integer(1, 6).expect("valid grid")
    }

    pub fn integer(qmin: u32, qmax: u32) -> Result<Self> {
        Self::new((qmin..=qmax).map(f64::from).collect())
    }

    /// qmin, qmin + step, … up to qmax (inclusive within rounding).
    pub fn stepped(qmin: f64, qmax: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(qmax >= qmin) {
            return Err(Error::InvalidArgument(
                "q grid needs step > 0 and qmax ≥ qmin".into(),
            ));
        }
        let count = ((qmax - qmin) / step + 1e-9).floor() as usize;
        Self::new((0..=count).map(|k| qmin + k as f64 * step).collect())
    }

    /// Real-valued grid with spacing 1/log(n)² on [qmin, qmax].
    pub fn refined(qmin: f64, qmax: f64, n: usize) -> Result<Self> {
        let ln = (n as f64).ln();
        Self::stepped(qmin, qmax, 1.0 / (ln * ln))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        *self.values.last().expect("non-empty")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Bases for every integer degree on one design grid, built on demand and shared.
#[derive(Debug)]
pub struct ModelFamily {
    grid: DesignGrid,
    kind: BasisKind,
    bases: Mutex<BTreeMap<usize, Arc<BasisHandle>>>,
}

impl Clone for ModelFamily {
    fn clone(&self) -> Self {
        let bases = self.bases.lock().expect("basis cache poisoned").clone();
        Self {
            grid: self.grid.clone(),
            kind: self.kind,
            bases: Mutex::new(bases),
        }
    }
}

impl ModelFamily {
    pub fn new(grid: DesignGrid, kind: BasisKind) -> Self {
        Self {
            grid,
            kind,
            bases: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn analytic(grid: DesignGrid) -> Self {
        Self::new(grid, BasisKind::AnalyticSurrogate)
    }

    pub fn grid(&self) -> &DesignGrid {
        &self.grid
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.grid.len()
    }

    /// Basis of degree ⌊q⌋.
    pub fn basis(&self, q: f64) -> Result<Arc<BasisHandle>> {
        let degree = null_space_dim(q);
        if let Some(b) = self
            .bases
            .lock()
            .expect("basis cache poisoned")
            .get(&degree)
        {
            return Ok(Arc::clone(b));
        }
        let built = Arc::new(make_basis(&self.grid, q, self.kind)?);
        let mut cache = self.bases.lock().expect("basis cache poisoned");
        Ok(Arc::clone(cache.entry(degree).or_insert(built)))
    }

    pub fn model(&self, q: f64) -> Result<SpectralModel> {
        SpectralModel::with_basis(&self.grid, q, self.basis(q)?)
    }

    /// X_{⌊q⌋} = Φ_{⌊q⌋}ᵀ y for every degree the grid touches.
    pub fn coefficients(&self, y: &[f64], qgrid: &QGrid) -> Result<CoefficientSet> {
        check_len(self.n(), y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("observations must be finite".into()));
        }
        let mut set = CoefficientSet {
            by_degree: BTreeMap::new(),
        };
        for &q in qgrid.values() {
            set.ensure(self, y, q)?;
        }
        Ok(set)
    }
}

/// Spectral coefficients of one data vector, keyed by basis degree.
#[derive(Debug, Clone, Default)]
pub struct CoefficientSet {
    by_degree: BTreeMap<usize, Vec<f64>>,
}

impl CoefficientSet {
    pub fn get(&self, q: f64) -> Option<&[f64]> {
        self.by_degree.get(&null_space_dim(q)).map(Vec::as_slice)
    }

    /// Computes the coefficients for ⌊q⌋ if missing.
    pub fn ensure(&mut self, family: &ModelFamily, y: &[f64], q: f64) -> Result<&[f64]> {
        let degree = null_space_dim(q);
        if !self.by_degree.contains_key(&degree) {
            let x = family.basis(q)?.forward(y)?;
            self.by_degree.insert(degree, x);
        }
        Ok(&self.by_degree[&degree])
    }
}
