use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::SignalSpectrum;
use crate::spectral::{make_basis, null_space_dim, BasisKind, DesignGrid};

/// Shape of a test signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    /// Σ_{i>⌊β⌋} (i+1)^{−β} cos(2i) ψ_{β,i} on the degree-⌊β⌋ surrogate basis.
    F1Spectral { beta: f64 },
    /// cos(5πx).
    F2Cosine,
    /// Σ_k c_k x^k.
    Polynomial { coefficients: Vec<f64> },
    /// Φ_d c for given spectral coefficients c.
    CustomSpectrum {
        degree: usize,
        coefficients: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    /// Divide by max f − min f.
    #[serde(default)]
    pub scale_by_range: bool,
}

impl Generator {
    pub fn f1() -> Self {
        Self {
            kind: GeneratorKind::F1Spectral { beta: 3.0 },
            scale_by_range: true,
        }
    }

    pub fn f2() -> Self {
        Self {
            kind: GeneratorKind::F2Cosine,
            scale_by_range: true,
        }
    }

    /// Element of 𝒫_d: degree d − 1 with unit coefficients.
    pub fn polynomial(d: usize) -> Self {
        Self {
            kind: GeneratorKind::Polynomial {
                coefficients: vec![1.0; d],
            },
            scale_by_range: false,
        }
    }

    pub fn custom(degree: usize, coefficients: Vec<f64>) -> Self {
        Self {
            kind: GeneratorKind::CustomSpectrum {
                degree,
                coefficients,
            },
            scale_by_range: false,
        }
    }

    pub fn unscaled(mut self) -> Self {
        self.scale_by_range = false;
        self
    }

    pub fn name(&self) -> String {
        match &self.kind {
            GeneratorKind::F1Spectral { beta } if *beta == 3.0 => "f1".into(),
            GeneratorKind::F1Spectral { beta } => format!("f1(beta={beta})"),
            GeneratorKind::F2Cosine => "f2".into(),
            GeneratorKind::Polynomial { coefficients } => {
                format!("polynomial(d={})", coefficients.len())
            }
            GeneratorKind::CustomSpectrum { degree, .. } => format!("custom(degree={degree})"),
        }
    }

    /// Nominal smoothness, where the construction implies one.
    pub fn beta_nominal(&self) -> Option<f64> {
        match &self.kind {
            GeneratorKind::F1Spectral { beta } => Some(*beta),
            _ => None,
        }
    }

    /// Function values on the grid.
    pub fn generate(&self, grid: &DesignGrid) -> Result<Vec<f64>> {
        let n = grid.len();
        let mut f = match &self.kind {
            GeneratorKind::F1Spectral { beta } => {
                let d = null_space_dim(*beta);
                let basis = make_basis(grid, *beta, BasisKind::AnalyticSurrogate)?;
                let c: Vec<f64> = (1..=n)
                    .map(|i| {
                        if i <= d {
                            0.0
                        } else {
                            ((i + 1) as f64).powf(-beta) * (2.0 * i as f64).cos()
                        }
                    })
                    .collect();
                basis.inverse(&c)?
            }
            GeneratorKind::F2Cosine => grid.points().iter().map(|x| (5.0 * PI * x).cos()).collect(),
            GeneratorKind::Polynomial { coefficients } => grid
                .points()
                .iter()
                .map(|&x| coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c))
                .collect(),
            GeneratorKind::CustomSpectrum {
                degree,
                coefficients,
            } => {
                if coefficients.len() != n {
                    return Err(Error::LengthMismatch {
                        expected: n,
                        got: coefficients.len(),
                    });
                }
                let q = if *degree == 0 { 0.75 } else { *degree as f64 };
                let basis = make_basis(grid, q, BasisKind::AnalyticSurrogate)?;
                basis.inverse(coefficients)?
            }
        };
        if self.scale_by_range {
            let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
            let range = hi - lo;
            if !(range > 0.0) {
                return Err(Error::DegenerateInput(
                    "constant signal cannot be range-scaled".into(),
                ));
            }
            f.iter_mut().for_each(|v| *v /= range);
        }
        Ok(f)
    }

    /// B = Φᵀf on the basis of degree ⌊q⌋.
    pub fn spectrum(&self, grid: &DesignGrid, q: f64) -> Result<SignalSpectrum> {
        let f = self.generate(grid)?;
        let basis = make_basis(grid, q, BasisKind::AnalyticSurrogate)?;
        let mut sp = SignalSpectrum::new(basis.forward(&f)?);
        sp.beta_nominal = self.beta_nominal();
        Ok(sp)
    }
}

/// i.i.d. N(0, σ²) errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma: 0.01 }
    }
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "σ must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    /// f + ε.
    pub fn observe<R: Rng + ?Sized>(&self, f: &[f64], rng: &mut R) -> Vec<f64> {
        f.iter()
            .map(|v| v + self.sigma * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}
