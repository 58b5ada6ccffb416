use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use super::eigen::null_space_dim;
use super::exact;
use super::grid::DesignGrid;
use crate::error::{check_len, Error, Result};

/// Backend used to realize Φ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    AnalyticSurrogate,
    ExactEigen,
}

/// Orthonormal n×n transform Φ whose first ⌊q⌋ columns span the polynomials
/// of degree < ⌊q⌋.
#[derive(Clone)]
pub struct BasisHandle {
    kind: BasisKind,
    degree: usize,
    n: usize,
    op: Operator,
}

#[derive(Clone)]
enum Operator {
    Cosine(Box<CosinePoly>),
    Dense { phi: DMatrix<f64>, eigen: Vec<f64> },
}

impl std::fmt::Debug for BasisHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BasisHandle")
            .field("kind", &self.kind)
            .field("degree", &self.degree)
            .field("n", &self.n)
            .finish()
    }
}

/// Builds Φ for order `q` on `grid`.
pub fn make_basis(grid: &DesignGrid, q: f64, kind: BasisKind) -> Result<BasisHandle> {
    let n = grid.len();
    super::eigen::eigenvalues(q, n)?;
    let degree = null_space_dim(q);
    let op = match kind {
        BasisKind::AnalyticSurrogate => Operator::Cosine(Box::new(CosinePoly::new(n, degree)?)),
        BasisKind::ExactEigen => {
            if q.fract() != 0.0 || !(1..=2).contains(&degree) {
                return Err(Error::UnsupportedBackend(format!(
                    "exact-eigen supports q ∈ {{1, 2}} only, got {q}"
                )));
            }
            if n > exact::MAX_N {
                return Err(Error::UnsupportedBackend(format!(
                    "exact-eigen supports n ≤ {}, got {n}",
                    exact::MAX_N
                )));
            }
            let (phi, eigen) = exact::penalty_eigen(n, degree)?;
            Operator::Dense { phi, eigen }
        }
    };
    Ok(BasisHandle {
        kind,
        degree,
        n,
        op,
    })
}

impl BasisHandle {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    /// Integer degree ⌊q⌋ used for the coefficients.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Eigenvalues from the dense backend, if any.
    pub fn exact_eigenvalues(&self) -> Option<&[f64]> {
        match &self.op {
            Operator::Dense { eigen, .. } => Some(eigen),
            Operator::Cosine(_) => None,
        }
    }

    /// X = Φᵀy.
    pub fn forward(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, y.len())?;
        Ok(match &self.op {
            Operator::Cosine(t) => t.forward(y),
            Operator::Dense { phi, .. } => (0..self.n)
                .map(|j| phi.column(j).iter().zip(y).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }

    /// y = Φ X.
    pub fn inverse(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, coeffs.len())?;
        Ok(match &self.op {
            Operator::Cosine(t) => t.inverse(coeffs),
            Operator::Dense { phi, .. } => {
                let mut y = vec![0.0; self.n];
                for (j, &c) in coeffs.iter().enumerate() {
                    if c != 0.0 {
                        for (yi, p) in y.iter_mut().zip(phi.column(j).iter()) {
                            *yi += c * p;
                        }
                    }
                }
                y
            }
        })
    }

    /// Column i (zero-based) of Φ.
    pub fn column(&self, i: usize) -> Result<Vec<f64>> {
        if i >= self.n {
            return Err(Error::InvalidArgument(format!("column {i} out of range")));
        }
        let mut e = vec![0.0; self.n];
        e[i] = 1.0;
        self.inverse(&e)
    }

    /// Dense Φ; intended for tests and small n.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            let col = self.column(j).expect("index in range");
            m.column_mut(j).copy_from_slice(&col);
        }
        m
    }
}

/// Gram-Schmidt orthonormalization of [P_0 … P_{d−1}, C_k for k ∉ dropped],
/// where P are Legendre polynomials in the index and C the orthonormal DCT-II
/// columns. P_0 replaces C_0 and each P_m with m ≥ 1 replaces the highest
/// remaining frequency of its parity, so column i > d carries frequency i − d
/// except at the very top of the spectrum.
///
/// In cosine coordinates each polynomial stage is an orthogonal lower
/// Hessenberg matrix, stored as a cascade of adjacent Givens rotations whose
/// angles come from suffix norms of the polynomial's coordinates. Both
/// transforms cost O(n d + n log n) and stay orthogonal to rounding.
#[derive(Clone)]
struct CosinePoly {
    stages: Vec<Stage>,
    dct: Arc<dyn TransformType2And3<f64>>,
}

/// One polynomial replacing the column at `pivot` of the current frequency list.
#[derive(Clone)]
struct Stage {
    pivot: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
    last_sign: f64,
}

impl Stage {
    /// `q` holds the polynomial's coordinates, pivot last.
    fn from_coordinates(pivot: usize, q: &[f64]) -> Self {
        let m = q.len();
        let mut tail = vec![0.0f64; m + 1];
        for r in (0..m).rev() {
            tail[r] = tail[r + 1].hypot(q[r]);
        }
        let mut cos = Vec::with_capacity(m - 1);
        let mut sin = Vec::with_capacity(m - 1);
        for r in 0..m - 1 {
            if tail[r] > 0.0 {
                cos.push(q[r] / tail[r]);
                sin.push(tail[r + 1] / tail[r]);
            } else {
                cos.push(1.0);
                sin.push(0.0);
            }
        }
        let last_sign = if q[m - 1] < 0.0 { -1.0 } else { 1.0 };
        Self {
            pivot,
            cos,
            sin,
            last_sign,
        }
    }

    /// Applies Gᵀ in place: x[0] becomes the polynomial coefficient.
    fn apply_transpose(&self, x: &mut [f64]) {
        let last = x.len() - 1;
        x[last] *= self.last_sign;
        for r in (0..self.cos.len()).rev() {
            let (c, s) = (self.cos[r], self.sin[r]);
            let (a, b) = (x[r], x[r + 1]);
            x[r] = c * a + s * b;
            x[r + 1] = -s * a + c * b;
        }
    }

    /// Applies G in place.
    fn apply(&self, x: &mut [f64]) {
        for r in 0..self.cos.len() {
            let (c, s) = (self.cos[r], self.sin[r]);
            let (a, b) = (x[r], x[r + 1]);
            x[r] = c * a - s * b;
            x[r + 1] = s * a + c * b;
        }
        let last = x.len() - 1;
        x[last] *= self.last_sign;
    }
}

/// Moves entry `pivot` to the end.
fn pivot_last(v: &mut [f64], pivot: usize) {
    v[pivot..].rotate_left(1);
}

fn pivot_back(v: &mut [f64], pivot: usize) {
    v[pivot..].rotate_right(1);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthonormal_legendre(n: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    let nf = n as f64;
    let t: Vec<f64> = (0..n).map(|j| (2 * j + 1) as f64 / nf - 1.0).collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(d);
    let (mut prev, mut cur) = (vec![0.0; n], vec![1.0; n]);
    for m in 0..d {
        let mut v = cur.clone();
        let start = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in &out {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if !(norm > 1e-10 * start) {
            return Err(Error::Numerical("polynomial basis lost rank".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        out.push(v);
        let mf = m as f64;
        let next: Vec<f64> = (0..n)
            .map(|j| ((2.0 * mf + 1.0) * t[j] * cur[j] - mf * prev[j]) / (mf + 1.0))
            .collect();
        prev = std::mem::replace(&mut cur, next);
    }
    Ok(out)
}

impl CosinePoly {
    fn new(n: usize, d: usize) -> Result<Self> {
        let dct = DctPlanner::new().plan_dct2(n);
        let polys = orthonormal_legendre(n, d)?;
        let mut this = Self {
            stages: Vec::with_capacity(d.saturating_sub(1)),
            dct,
        };
        // labels of the current cosine-like columns, after P_0 has taken C_0
        let mut labels: Vec<usize> = (1..n).collect();
        for (m, p) in polys.iter().enumerate().skip(1) {
            let coords = this.reduce(p, m);
            let mut q = coords[m..].to_vec();
            let norm = dot(&q, &q).sqrt();
            q.iter_mut().for_each(|x| *x /= norm);
            let pivot = labels
                .iter()
                .rposition(|&k| k % 2 == m % 2)
                .ok_or_else(|| Error::Numerical("no pivot frequency available".into()))?;
            pivot_last(&mut q, pivot);
            this.stages.push(Stage::from_coordinates(pivot, &q));
            labels.remove(pivot);
        }
        Ok(this)
    }

    /// Cosine coordinates of y carried through the stages of P_1 … P_{m−1}.
    fn reduce(&self, y: &[f64], stages: usize) -> Vec<f64> {
        let mut x = dct2_orthonormal(&*self.dct, y);
        if stages == 0 {
            return x;
        }
        for (m, stage) in self.stages.iter().take(stages - 1).enumerate() {
            let tail = &mut x[m + 1..];
            pivot_last(tail, stage.pivot);
            stage.apply_transpose(tail);
        }
        x
    }

    fn forward(&self, y: &[f64]) -> Vec<f64> {
        self.reduce(y, self.stages.len() + 1)
    }

    fn inverse(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut x = coeffs.to_vec();
        for (m, stage) in self.stages.iter().enumerate().rev() {
            let tail = &mut x[m + 1..];
            stage.apply(tail);
            pivot_back(tail, stage.pivot);
        }
        dct3_orthonormal(&*self.dct, &x)
    }
}

/// Cᵀx for the orthonormal DCT-II matrix C.
fn dct2_orthonormal(plan: &dyn TransformType2And3<f64>, x: &[f64]) -> Vec<f64> {
    let mut buf = x.to_vec();
    plan.process_dct2(&mut buf);
    let scale = (2.0 / x.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf[0] *= FRAC_1_SQRT_2;
    buf
}

/// C c for the orthonormal DCT-II matrix C.
fn dct3_orthonormal(plan: &dyn TransformType2And3<f64>, c: &[f64]) -> Vec<f64> {
    let mut buf = c.to_vec();
    buf[0] *= std::f64::consts::SQRT_2;
    plan.process_dct3(&mut buf);
    let scale = (2.0 / c.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}
