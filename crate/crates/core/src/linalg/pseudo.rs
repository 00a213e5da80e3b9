use nalgebra::SVD;

use super::{Mat, Vector};
use crate::config::Tolerances;
use crate::error::{OuError, Result};

/// Rank-truncated SVD `B = U_r diag(s_r) V_r^T`, kept for repeated least-norm solves.
#[derive(Debug, Clone)]
pub struct Pinv {
    u: Mat,
    s: Vector,
    v: Mat,
    rows: usize,
    cols: usize,
    membership: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastNorm {
    pub solution: Vector,
    pub residual: f64,
    pub in_range: bool,
}

impl Pinv {
    pub fn new(b: &Mat, tol: &Tolerances) -> Self {
        let (rows, cols) = b.shape();
        if b.is_empty() {
            return Self {
                u: Mat::zeros(rows, 0),
                s: Vector::zeros(0),
                v: Mat::zeros(cols, 0),
                rows,
                cols,
                membership: tol.membership,
            };
        }
        let (u, sv, vt) = checked_svd(b);
        let sv = &sv;
        let top = sv.max();
        let cutoff = tol.rank_cutoff(top, rows, cols);
        let keep: Vec<usize> = (0..sv.len())
            .filter(|&k| sv[k] > cutoff && sv[k] > 0.0)
            .collect();
        let r = keep.len();
        let mut ur = Mat::zeros(rows, r);
        let mut vr = Mat::zeros(cols, r);
        let mut sr = Vector::zeros(r);
        for (j, &k) in keep.iter().enumerate() {
            ur.set_column(j, &u.column(k));
            vr.set_column(j, &vt.row(k).transpose());
            sr[j] = sv[k];
        }
        Self {
            u: ur,
            s: sr,
            v: vr,
            rows,
            cols,
            membership: tol.membership,
        }
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Orthonormal basis of range(B).
    pub fn range_basis(&self) -> &Mat {
        &self.u
    }

    pub fn singular_values(&self) -> &Vector {
        &self.s
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn solve(&self, y: &Vector) -> Result<LeastNorm> {
        if y.len() != self.rows {
            return Err(OuError::dims(
                format!("vector of length {}", self.rows),
                y.len().to_string(),
            ));
        }
        let coeff = self.u.transpose() * y;
        let scaled = coeff.component_div(&self.s);
        let solution = &self.v * scaled;
        let residual = (y - &self.u * coeff).norm();
        let in_range = residual <= self.membership * (1.0 + y.norm());
        Ok(LeastNorm {
            solution,
            residual,
            in_range,
        })
    }

    /// Least-norm solution of `B X = Y` column by column; also returns the
    /// worst column residual and whether every column lies in range(B).
    pub fn solve_columns(&self, y: &Mat) -> Result<(Mat, f64, bool)> {
        let mut x = Mat::zeros(self.cols, y.ncols());
        let mut worst = 0.0_f64;
        let mut all_in = true;
        for (j, col) in y.column_iter().enumerate() {
            let sol = self.solve(&col.into_owned())?;
            x.set_column(j, &sol.solution);
            worst = worst.max(sol.residual);
            all_in &= sol.in_range;
        }
        Ok((x, worst, all_in))
    }

    /// Orthogonal projector onto range(B).
    pub fn range_projector(&self) -> Mat {
        &self.u * self.u.transpose()
    }
}

/// Thin SVD `(U, s, V^T)`. The QR-iteration result is accepted only if it
/// reconstructs `B`; some rank-deficient inputs make it return wrong
/// singular vectors, and those go to one-sided Jacobi instead.
pub fn checked_svd(b: &Mat) -> (Mat, Vector, Mat) {
    let svd = SVD::new(b.clone(), true, true);
    let (u, s, vt) = (
        svd.u.expect("requested U"),
        svd.singular_values,
        svd.v_t.expect("requested V^T"),
    );
    let recon = (&u * Mat::from_diagonal(&s) * &vt - b).norm();
    let scale = b.norm() * (b.nrows().max(b.ncols()) as f64);
    if recon.is_finite() && recon <= 1e3 * f64::EPSILON * scale {
        return (u, s, vt);
    }
    jacobi_svd(b)
}

/// Singular values through [`checked_svd`], in no particular order.
pub fn checked_singular_values(b: &Mat) -> Vector {
    checked_svd(b).1
}

/// One-sided (Hestenes) Jacobi SVD: orthogonalizes the columns of B by plane
/// rotations accumulated into V.
pub fn jacobi_svd(b: &Mat) -> (Mat, Vector, Mat) {
    if b.nrows() < b.ncols() {
        let (u, s, vt) = jacobi_svd(&b.transpose());
        return (vt.transpose(), s, u.transpose());
    }
    let n = b.ncols();
    let mut w = b.clone();
    let mut v = Mat::identity(n, n);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                rotate_columns(&mut w, p, q, c, sn);
                rotate_columns(&mut v, p, q, c, sn);
            }
        }
        if !rotated {
            break;
        }
    }
    let s = Vector::from_iterator(n, w.column_iter().map(|c| c.norm()));
    let mut u = w;
    for (j, mut col) in u.column_iter_mut().enumerate() {
        if s[j] > 0.0 {
            col /= s[j];
        }
    }
    (u, s, v.transpose())
}

const JACOBI_MAX_SWEEPS: usize = 60;

fn rotate_columns(m: &mut Mat, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..m.nrows() {
        let (x, y) = (m[(r, p)], m[(r, q)]);
        m[(r, p)] = c * x - s * y;
        m[(r, q)] = s * x + c * y;
    }
}

/// Least-norm `u` minimizing `|B u - y|`, with membership of `y` in range(B).
pub fn pseudo_apply(b: &Mat, y: &Vector, tol: &Tolerances) -> Result<LeastNorm> {
    Pinv::new(b, tol).solve(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_input() {
        let y = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let out = pseudo_apply(&Mat::identity(3, 3), &y, &Tolerances::default()).unwrap();
        assert!((&out.solution - &y).norm() < 1e-15);
        assert!(out.residual < 1e-15 && out.in_range);
    }

    #[test]
    fn out_of_range_vector() {
        let b = Mat::from_row_slice(2, 1, &[1.0, 0.0]);
        let y = Vector::from_vec(vec![0.0, 1.0]);
        let out = pseudo_apply(&b, &y, &Tolerances::default()).unwrap();
        assert!(out.solution[0].abs() < 1e-15);
        assert!((out.residual - 1.0).abs() < 1e-15);
        assert!(!out.in_range);
    }

    #[test]
    fn rank_deficient_least_norm() {
        // two identical columns: least-norm preimage splits the weight evenly
        let b = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let y = Vector::from_vec(vec![2.0, 0.0]);
        let out = pseudo_apply(&b, &y, &Tolerances::default()).unwrap();
        assert!((out.solution[0] - 1.0).abs() < 1e-14 && (out.solution[1] - 1.0).abs() < 1e-14);
    }

    // QR-iteration SVD returns wrong singular vectors for this PSD factor
    fn troublesome_factor() -> Mat {
        Mat::from_row_slice(
            3,
            3,
            &[
                0.049609546932377485,
                0.17203827724311266,
                -0.09121538217365707,
                0.17203827724311266,
                0.858152554544307,
                0.11424394548883121,
                -0.09121538217365704,
                0.11424394548883116,
                0.8765117972479698,
            ],
        )
    }

    #[test]
    fn checked_svd_reconstructs() {
        let b = troublesome_factor();
        let (u, s, vt) = checked_svd(&b);
        assert!((&u * Mat::from_diagonal(&s) * &vt - &b).norm() < 1e-14);
        let pinv = Pinv::new(&b, &Tolerances::default());
        assert_eq!(pinv.rank(), 2);
        // b b^T has the same range; each of its columns must be inside
        let (_, worst, inside) = pinv.solve_columns(&(&b * b.transpose())).unwrap();
        assert!(inside && worst < 1e-14, "{worst}");
    }

    #[test]
    fn jacobi_matches_on_wide_and_tall() {
        let b = Mat::from_row_slice(2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0]);
        for m in [b.clone(), b.transpose()] {
            let (u, s, vt) = jacobi_svd(&m);
            assert!((&u * Mat::from_diagonal(&s) * &vt - &m).norm() < 1e-14);
            let mut got: Vec<f64> = s.iter().copied().filter(|&x| x > 1e-12).collect();
            let mut want: Vec<f64> = m.singular_values().iter().copied().collect();
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn wrong_length_rejected() {
        let b = Mat::identity(2, 2);
        assert!(pseudo_apply(&b, &Vector::zeros(3), &Tolerances::default()).is_err());
    }
}
