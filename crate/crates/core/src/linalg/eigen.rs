use num_complex::Complex64;

use super::{to_complex, CMat, Mat};
use crate::error::{OuError, Result};

/// Eigendecomposition of a real square matrix obtained from its complex Schur
/// form `A = Z T Z*`: eigenvalues are the diagonal of `T`, eigenvectors come
/// from back substitution on the triangular factor.
#[derive(Debug, Clone)]
pub struct ComplexEigen {
    pub values: Vec<Complex64>,
    /// Unit-norm eigenvectors stored column-wise.
    pub vectors: CMat,
    /// 2-norm condition number of `vectors` (infinite when singular).
    pub condition: f64,
}

pub(crate) fn complex_schur(a: &Mat) -> Result<(CMat, CMat)> {
    let schur = to_complex(a)
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| OuError::Unrepresentable("Schur iteration did not converge".into()))?;
    Ok(schur.unpack())
}

impl ComplexEigen {
    pub fn new(a: &Mat) -> Result<Self> {
        let n = a.nrows();
        let (z, t) = complex_schur(a)?;
        let values: Vec<Complex64> = (0..n).map(|k| t[(k, k)]).collect();
        let tnorm = t.norm().max(f64::MIN_POSITIVE);
        let small = f64::EPSILON * tnorm;

        let mut x = CMat::zeros(n, n);
        for k in 0..n {
            let lambda = values[k];
            x[(k, k)] = Complex64::new(1.0, 0.0);
            for i in (0..k).rev() {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in (i + 1)..=k {
                    acc += t[(i, j)] * x[(j, k)];
                }
                let mut d = t[(i, i)] - lambda;
                if d.norm() < small {
                    d = Complex64::new(small, 0.0);
                }
                x[(i, k)] = -acc / d;
            }
        }
        let mut vectors = &z * x;
        for mut col in vectors.column_iter_mut() {
            let nrm = col.norm();
            if nrm > 0.0 {
                col /= Complex64::new(nrm, 0.0);
            }
        }
        let sv = vectors.clone().singular_values();
        let smin = sv.min();
        let condition = if smin > 0.0 {
            sv.max() / smin
        } else {
            f64::INFINITY
        };
        Ok(Self {
            values,
            vectors,
            condition,
        })
    }

    pub fn abscissa(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// max Re(lambda) over the spectrum of `a`.
pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    let (_, t) = complex_schur(a)?;
    Ok((0..a.nrows())
        .map(|k| t[(k, k)].re)
        .fold(f64::NEG_INFINITY, f64::max))
}
