use super::{ensure_symmetric, scale_columns, sym_eigen_desc, Mat, PsdSplit, Vector};
use crate::config::Tolerances;
use crate::error::{OuError, Result};

/// `sup <Qx,x> / <Rx,x>` over `x` outside ker R.
#[derive(Debug, Clone, PartialEq)]
pub struct PencilResult {
    /// +infinity exactly when `kernel_violation` is set.
    pub sup_ratio: f64,
    /// Unit vector attaining the ratio, or a unit vector of ker R not killed by Q.
    pub argmax_vector: Option<Vector>,
    pub kernel_violation: bool,
}

impl PencilResult {
    pub fn is_finite(&self) -> bool {
        self.sup_ratio.is_finite()
    }
}

struct Reduced {
    /// W = V_r diag(lambda_r^{-1/2}); columns span range(R).
    whitening: Mat,
    /// W^T Q W
    reduced: Mat,
    violation: Option<Vector>,
}

fn reduce(q: &Mat, r: &Mat, tol: &Tolerances) -> Result<Reduced> {
    let n = q.nrows();
    if q.ncols() != n || r.shape() != (n, n) {
        return Err(OuError::dims(
            format!("two {n}x{n} matrices"),
            format!(
                "{}x{} and {}x{}",
                q.nrows(),
                q.ncols(),
                r.nrows(),
                r.ncols()
            ),
        ));
    }
    ensure_symmetric(q, tol)?;
    ensure_symmetric(r, tol)?;

    let r_split = PsdSplit::new(r, tol);
    let q_scale = sym_eigen_desc(q)
        .0
        .iter()
        .fold(0.0_f64, |a, v| a.max(v.abs()));
    let q_cutoff = tol.rank_cutoff(q_scale, n, n);

    let mut violation = None;
    if r_split.kernel.ncols() > 0 && q_scale > 0.0 {
        let k = &r_split.kernel;
        let projected = k.transpose() * q * k;
        let (vals, vecs) = sym_eigen_desc(&projected);
        if vals[0] > q_cutoff {
            let w = k * vecs.column(0);
            violation = Some(w.normalize());
        }
    }
    let inv_sqrt = r_split.values.map(|v| 1.0 / v.sqrt());
    let whitening = scale_columns(&r_split.range, &inv_sqrt);
    let reduced = whitening.transpose() * q * &whitening;
    Ok(Reduced {
        whitening,
        reduced,
        violation,
    })
}

/// Largest generalized eigenvalue of the symmetric PSD pencil `(Q, R)` on range(R);
/// +infinity when ker R is not contained in ker Q.
pub fn pencil_sup_ratio(q: &Mat, r: &Mat, tol: &Tolerances) -> Result<PencilResult> {
    let red = reduce(q, r, tol)?;
    if let Some(w) = red.violation {
        return Ok(PencilResult {
            sup_ratio: f64::INFINITY,
            argmax_vector: Some(w),
            kernel_violation: true,
        });
    }
    if red.reduced.nrows() == 0 {
        return Ok(PencilResult {
            sup_ratio: 0.0,
            argmax_vector: None,
            kernel_violation: false,
        });
    }
    let (vals, vecs) = sym_eigen_desc(&red.reduced);
    let x = &red.whitening * vecs.column(0);
    Ok(PencilResult {
        sup_ratio: vals[0].max(0.0),
        argmax_vector: Some(x.normalize()),
        kernel_violation: false,
    })
}

/// All generalized eigenvalues of `(Q, R)` restricted to range(R), decreasing.
/// Fails with `NotInRange` when ker R is not contained in ker Q.
pub fn pencil_eigenvalues(q: &Mat, r: &Mat, tol: &Tolerances) -> Result<Vector> {
    let red = reduce(q, r, tol)?;
    if let Some(w) = red.violation {
        let residual = (q * &w).norm();
        return Err(OuError::NotInRange { residual });
    }
    Ok(sym_eigen_desc(&red.reduced).0)
}
