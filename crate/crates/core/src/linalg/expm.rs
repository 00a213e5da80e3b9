use num_complex::Complex64;

use super::{ensure_square, CMat, ComplexEigen, Mat};
use crate::config::Tolerances;
use crate::error::{OuError, Result};

/// Which route produced an exponential.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpmMethod {
    Identity,
    Eigen,
    Pade13,
}

// [13/13] Pade coefficients (Higham 2005, Table 10.4).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `e^{tA}`. Diagonalizes when the eigenvector basis is well conditioned,
/// otherwise uses scaling and squaring with a [13/13] Pade approximant.
pub fn expm(a: &Mat, t: f64, tol: &Tolerances) -> Result<Mat> {
    expm_with_method(a, t, tol).map(|(m, _)| m)
}

pub fn expm_with_method(a: &Mat, t: f64, tol: &Tolerances) -> Result<(Mat, ExpmMethod)> {
    let n = ensure_square(a, "expm")?;
    if !t.is_finite() || t < 0.0 {
        return Err(OuError::InvalidInput(format!(
            "expm time must be finite and >= 0, got {t}"
        )));
    }
    if t == 0.0 || a.iter().all(|&x| x == 0.0) {
        return Ok((Mat::identity(n, n), ExpmMethod::Identity));
    }
    let scaled = a * t;
    if let Ok(eig) = ComplexEigen::new(&scaled) {
        if eig.condition < tol.eig_cond_max {
            if let Some(m) = expm_eigen(&eig) {
                return finite_or_err(m, ExpmMethod::Eigen);
            }
        }
    }
    finite_or_err(expm_pade(&scaled), ExpmMethod::Pade13)
}

fn finite_or_err(m: Mat, method: ExpmMethod) -> Result<(Mat, ExpmMethod)> {
    if m.iter().all(|x| x.is_finite()) {
        Ok((m, method))
    } else {
        Err(OuError::Unrepresentable(
            "matrix exponential overflowed".into(),
        ))
    }
}

fn expm_eigen(eig: &ComplexEigen) -> Option<Mat> {
    let v = &eig.vectors;
    let vinv = v.clone().try_inverse()?;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= eig.values[j].exp();
    }
    let full = scaled * vinv;
    Some(full.map(|z: Complex64| z.re))
}

/// `t -> e^{tA}` for one fixed `A`, diagonalizing `A` once when the
/// eigenvector basis is well conditioned.
#[derive(Debug, Clone)]
pub struct ExpmFamily {
    a: Mat,
    eigen: Option<(CMat, Vec<Complex64>, CMat)>,
}

impl ExpmFamily {
    pub fn new(a: &Mat, tol: &Tolerances) -> Result<Self> {
        ensure_square(a, "expm")?;
        let eigen = ComplexEigen::new(a).ok().and_then(|eig| {
            if eig.condition >= tol.eig_cond_max {
                return None;
            }
            let vinv = eig.vectors.clone().try_inverse()?;
            Some((eig.vectors, eig.values, vinv))
        });
        Ok(Self {
            a: a.clone(),
            eigen,
        })
    }

    pub fn method(&self) -> ExpmMethod {
        if self.eigen.is_some() {
            ExpmMethod::Eigen
        } else {
            ExpmMethod::Pade13
        }
    }

    pub fn at(&self, t: f64) -> Result<Mat> {
        let n = self.a.nrows();
        if !t.is_finite() || t < 0.0 {
            return Err(OuError::InvalidInput(format!(
                "expm time must be finite and >= 0, got {t}"
            )));
        }
        if t == 0.0 {
            return Ok(Mat::identity(n, n));
        }
        let m = match &self.eigen {
            Some((v, values, vinv)) => {
                let mut scaled = v.clone();
                for (j, mut col) in scaled.column_iter_mut().enumerate() {
                    col *= (values[j] * t).exp();
                }
                (scaled * vinv).map(|z| z.re)
            }
            None => expm_pade(&(&self.a * t)),
        };
        finite_or_err(m, self.method()).map(|(m, _)| m)
    }
}

/// Scaling and squaring with the [13/13] Pade approximant.
pub fn expm_pade(a: &Mat) -> Mat {
    let n = a.nrows();
    let norm1 = a
        .column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > THETA13 {
        (norm1 / THETA13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let b = &PADE13;
    let id = Mat::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &id * b[0];

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .unwrap_or_else(|| Mat::from_element(n, n, f64::NAN));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}
