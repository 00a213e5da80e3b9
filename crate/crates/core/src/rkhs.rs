//! Reproducing kernel Hilbert spaces of covariance operators, represented as
//! the range of a factor `B` with `|B u|_H = |u|` for `u` orthogonal to ker B.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::covariance::{gramian_quadrature, invariant_covariance};
use crate::error::{OuError, Result};
use crate::linalg::{
    ensure_finite, numerical_rank, pencil_sup_ratio, symmetrize, Mat, Pinv, PsdSplit, Vector,
};
use crate::model::OuModel;

#[derive(Debug, Clone)]
pub struct RkhsSpace {
    factor: Mat,
    gram: Mat,
    pinv: Pinv,
}

impl RkhsSpace {
    pub fn from_factor(factor: Mat, tol: &Tolerances) -> Result<Self> {
        if factor.nrows() == 0 {
            return Err(OuError::InvalidInput(
                "factor must have at least one row".into(),
            ));
        }
        ensure_finite(&factor, "RKHS factor")?;
        let gram = symmetrize(&(&factor * factor.transpose()));
        let pinv = Pinv::new(&factor, tol);
        Ok(Self { factor, gram, pinv })
    }

    /// Factorizes a covariance by its symmetric square root. Eigenvalues below
    /// `-rank_rel * lambda_max * n` are rejected, smaller negatives clamp to 0.
    pub fn from_gram(gram: &Mat, tol: &Tolerances) -> Result<Self> {
        ensure_finite(gram, "RKHS Gram matrix")?;
        let split = PsdSplit::new(&symmetrize(gram), tol);
        let n = gram.nrows();
        if split.min_eigenvalue < -tol.rank_cutoff(split.largest(), n, n) {
            return Err(OuError::IndefiniteCovariance {
                min_eigenvalue: split.min_eigenvalue,
            });
        }
        Self::from_factor(split.sqrt(), tol)
    }

    pub fn factor(&self) -> &Mat {
        &self.factor
    }

    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    pub fn rank(&self) -> usize {
        self.pinv.rank()
    }

    pub fn ambient_dim(&self) -> usize {
        self.factor.nrows()
    }

    /// Least-norm preimage of `h` and whether `h` lies in the space.
    pub fn preimage(&self, h: &Vector) -> Result<(Vector, bool)> {
        let sol = self.pinv.solve(h)?;
        Ok((sol.solution, sol.in_range))
    }

    /// `min { |u| : B u = h }`, or +infinity when `h` is outside range(B).
    pub fn norm(&self, h: &Vector) -> Result<f64> {
        let (u, inside) = self.preimage(h)?;
        Ok(if inside { u.norm() } else { f64::INFINITY })
    }

    /// Inner product of two members; `None` when either is outside the space.
    pub fn inner(&self, g: &Vector, h: &Vector) -> Result<Option<f64>> {
        let (u, gi) = self.preimage(g)?;
        let (v, hi) = self.preimage(h)?;
        Ok((gi && hi).then(|| u.dot(&v)))
    }
}

pub fn rkhs_norm(space: &RkhsSpace, h: &Vector) -> Result<f64> {
    space.norm(h)
}

/// H = range(i) with the norm transported by the injective embedding.
pub fn build_h(model: &OuModel, tol: &Tolerances) -> Result<RkhsSpace> {
    model.ensure_dense()?;
    RkhsSpace::from_factor(model.noise().clone(), tol)
}

/// H_t, the space of states reachable at time t, normed by minimum energy.
pub fn build_ht(model: &OuModel, t: f64, tol: &Tolerances) -> Result<RkhsSpace> {
    if let Some(d) = model.diagonal_data() {
        model.ensure_dense()?;
        let g = crate::covariance::gramian_diagonal_closed_form(&d.q, &d.a, t);
        let root = Vector::from_iterator(g.len(), g.iter().map(|v| v.sqrt()));
        return RkhsSpace::from_factor(Mat::from_diagonal(&root), tol);
    }
    let q_t = gramian_quadrature(model, t, tol)?.value;
    RkhsSpace::from_gram(&q_t, tol)
}

/// H_inf, the space of the invariant covariance.
pub fn build_hinf(model: &OuModel, tol: &Tolerances) -> Result<RkhsSpace> {
    RkhsSpace::from_gram(&invariant_covariance(model, tol)?.matrix, tol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionVerdict {
    pub included: bool,
    /// `|h|_B^2 <= M |h|_A^2`; +infinity when not included.
    #[serde(with = "crate::io::extended_float")]
    pub constant_m: f64,
    /// `Some(true)` when the ranges coincide; otherwise unknown.
    pub dense: Option<bool>,
    /// Direction attaining `M`, or a kernel direction of B's Gram matrix not
    /// annihilated by A's.
    #[serde(skip)]
    pub witness: Option<Vector>,
}

/// Is space `a` contained in space `b`? Decided by the pencil (gram_a, gram_b).
pub fn inclusion(a: &RkhsSpace, b: &RkhsSpace, tol: &Tolerances) -> Result<InclusionVerdict> {
    if a.ambient_dim() != b.ambient_dim() {
        return Err(OuError::dims(
            format!("spaces in dimension {}", a.ambient_dim()),
            b.ambient_dim().to_string(),
        ));
    }
    let res = pencil_sup_ratio(a.gram(), b.gram(), tol)?;
    let included = res.sup_ratio.is_finite();
    let dense = (included && numerical_rank(a.gram(), tol) == b.rank()).then_some(true);
    Ok(InclusionVerdict {
        included,
        constant_m: res.sup_ratio,
        dense,
        witness: res.argmax_vector,
    })
}

/// `lower |h|_a <= |h|_b <= upper |h|_a` on the common space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEquivalence {
    pub equivalent: bool,
    pub lower: f64,
    #[serde(with = "crate::io::extended_float")]
    pub upper: f64,
}

pub fn equivalent_norms(a: &RkhsSpace, b: &RkhsSpace, tol: &Tolerances) -> Result<NormEquivalence> {
    let ab = inclusion(a, b, tol)?;
    let ba = inclusion(b, a, tol)?;
    Ok(NormEquivalence {
        equivalent: ab.included && ba.included,
        lower: if ba.included {
            1.0 / ba.constant_m.sqrt()
        } else {
            0.0
        },
        upper: ab.constant_m.sqrt(),
    })
}
