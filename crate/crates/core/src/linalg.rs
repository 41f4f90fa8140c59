//! Dense eigendecompositions used by the propagators and the perturbative
//! expansion.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, MatRef, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::C64;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> DVector<C64> {
        self.vectors.column(k).into_owned()
    }
}

fn to_faer(a: &DMatrix<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: MatRef<'_, C64>) -> DMatrix<C64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn check_square(a: &DMatrix<C64>, context: &'static str) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context,
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(context));
    }
    Ok(())
}

/// Diagonalizes a Hermitian matrix. Only the lower triangle is read.
pub fn eigh(h: &DMatrix<C64>) -> Result<HermitianEigen> {
    check_square(h, "eigh input")?;
    let n = h.nrows();
    let eig = to_faer(h)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("Hermitian eigensolver failed: {e:?}")))?;
    let (s, u) = (eig.S().column_vector(), eig.U());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let values = DVector::from_iterator(n, order.iter().map(|&k| s[k].re));
    let vectors = DMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Right eigenvectors together with their inverse: `A = V diag(λ) V⁻¹`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: DVector<C64>,
    pub vectors: DMatrix<C64>,
    pub inverse: DMatrix<C64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn from_hermitian(h: &HermitianEigen) -> Self {
        Self {
            values: h.values.map(|x| C64::new(x, 0.0)),
            vectors: h.vectors.clone(),
            inverse: h.vectors.adjoint(),
        }
    }

    /// `max |A V − V Λ|` relative to `max |A|`.
    pub fn residual(&self, a: &DMatrix<C64>) -> f64 {
        let lhs = a * &self.vectors;
        let mut rhs = self.vectors.clone();
        for (k, mut col) in rhs.column_iter_mut().enumerate() {
            col *= self.values[k];
        }
        let scale = a.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
    }
}

/// Diagonalizes a general complex matrix.
///
/// Fails when the matrix is numerically defective, i.e. when the eigenvector
/// matrix cannot be inverted to working accuracy.
pub fn eig(a: &DMatrix<C64>) -> Result<Eigen> {
    check_square(a, "eig input")?;
    let n = a.nrows();
    let evd = to_faer(a)
        .eigen()
        .map_err(|e| Error::Eigensolver(format!("eigensolver failed: {e:?}")))?;
    let values = DVector::from_iterator(n, evd.S().column_vector().iter().copied());
    let mut vectors = from_faer(evd.U());
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col /= C64::new(norm, 0.0);
    }
    let inverse = from_faer(to_faer(&vectors).partial_piv_lu().inverse().as_ref());
    let defect = max_abs(&(&vectors * &inverse - DMatrix::<C64>::identity(n, n)));
    let cond = max_abs(&vectors) * max_abs(&inverse) * n as f64;
    if !(defect < 1e-8 && cond < 1e10) {
        return Err(Error::Eigensolver(format!(
            "ill-conditioned eigenvectors (inverse defect {defect:.2e}, condition {cond:.2e})"
        )));
    }
    let out = Eigen {
        values,
        vectors,
        inverse,
    };
    let res = out.residual(a);
    if !(res < 1e-9) {
        return Err(Error::Eigensolver(format!(
            "eigen residual {res:.2e} too large"
        )));
    }
    Ok(out)
}

/// Largest `|A − A†|` entry.
pub fn hermiticity_defect(a: &DMatrix<C64>) -> f64 {
    (a - a.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn max_abs(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
