//! Dense matrix primitives consumed by every other module: the matrix
//! exponential, symmetric-definite pencils, least-norm solves, the numerical
//! range and a Bartels-Stewart Liapunov solver.

mod eigen;
mod expm;
mod lyapunov;
mod numrange;
mod pencil;
mod pseudo;

pub use eigen::{spectral_abscissa, ComplexEigen};
pub use expm::{expm, expm_pade, expm_with_method, ExpmFamily, ExpmMethod};
pub use lyapunov::solve_continuous_lyapunov;
pub use numrange::{numerical_range, sector_constant, NumericalRangeSample, SectorEstimate};
pub use pencil::{pencil_eigenvalues, pencil_sup_ratio, PencilResult};
pub use pseudo::{checked_singular_values, checked_svd, jacobi_svd, pseudo_apply, LeastNorm, Pinv};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{OuError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type CMat = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn ensure_square(m: &Mat, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(OuError::dims(
            format!("{what}: nonempty square matrix"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OuError::InvalidInput(format!(
            "{what} has non-finite entries"
        )))
    }
}

/// (M + M^T) / 2
pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// |M - M^T|_F / max(1, |M|_F)
pub fn symmetry_defect(m: &Mat) -> f64 {
    (m - m.transpose()).norm() / m.norm().max(1.0)
}

pub fn ensure_symmetric(m: &Mat, tol: &Tolerances) -> Result<()> {
    let defect = symmetry_defect(m);
    if defect > tol.sym.max(1e-12) * 10.0 {
        return Err(OuError::Asymmetric { defect });
    }
    Ok(())
}

/// Largest singular value.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    checked_singular_values(m).max()
}

pub fn spectral_norm_c(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Symmetric eigendecomposition with eigenvalues sorted in decreasing order.
pub fn sym_eigen_desc(m: &Mat) -> (Vector, Mat) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = Vector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = Mat::zeros(n, n);
    for (j, &k) in order.iter().enumerate() {
        vectors.set_column(j, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Rank-truncated eigendecomposition `M ~ U diag(lambda) U^T` of a symmetric
/// positive semidefinite matrix. Also keeps an orthonormal kernel basis.
#[derive(Debug, Clone)]
pub struct PsdSplit {
    pub range: Mat,
    pub values: Vector,
    pub kernel: Mat,
    /// Most negative eigenvalue seen (0 when none).
    pub min_eigenvalue: f64,
}

impl PsdSplit {
    pub fn new(m: &Mat, tol: &Tolerances) -> Self {
        let n = m.nrows();
        let (values, vectors) = sym_eigen_desc(m);
        let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let cutoff = tol.rank_cutoff(top, n, n);
        let rank = values
            .iter()
            .take_while(|&&v| v > cutoff && v > 0.0)
            .count();
        let min_eigenvalue = values.iter().copied().fold(0.0_f64, f64::min);
        Self {
            range: vectors.columns(0, rank).into_owned(),
            values: values.rows(0, rank).into_owned(),
            kernel: vectors.columns(rank, n - rank).into_owned(),
            min_eigenvalue,
        }
    }

    pub fn rank(&self) -> usize {
        self.values.len()
    }

    pub fn largest(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// U diag(sqrt(lambda)) U^T
    pub fn sqrt(&self) -> Mat {
        let scaled = scale_columns(&self.range, &self.values.map(f64::sqrt));
        &scaled * self.range.transpose()
    }
}

pub fn scale_columns(m: &Mat, s: &Vector) -> Mat {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= s[j];
    }
    out
}

/// Numerical rank with the global cutoff.
pub fn numerical_rank(m: &Mat, tol: &Tolerances) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = checked_singular_values(m);
    let top = sv.max();
    if top == 0.0 {
        return 0;
    }
    let cutoff = tol.rank_cutoff(top, m.nrows(), m.ncols());
    sv.iter().filter(|&&s| s > cutoff).count()
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Values above `cap` are promoted to +infinity; returns (value, raw when capped).
pub fn cap_infinite(value: f64, cap: f64) -> (f64, Option<f64>) {
    if value.is_finite() && value > cap {
        (f64::INFINITY, Some(value))
    } else {
        (value, None)
    }
}
