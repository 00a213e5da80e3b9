//! Invariance of the noise space H under S(t), the restricted semigroup S_H in
//! orthonormal H-coordinates, and the criteria built on it.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::covariance::gramian_quadrature;
use crate::error::{OuError, Result};
use crate::linalg::{
    expm, numerical_rank, pencil_sup_ratio, spectral_abscissa, spectral_norm, sym_eigen_desc,
    symmetrize, Mat, Pinv, Vector,
};
use crate::model::OuModel;
use crate::quadrature::integrate_graded;
use crate::rkhs::{build_ht, RkhsSpace};

/// Default sample used when the caller gives no times.
pub const DEFAULT_INVARIANCE_TIMES: [f64; 3] = [0.1, 1.0, 3.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceSample {
    pub t: f64,
    /// Worst relative residual of projecting the columns of S(t) i onto range(i).
    pub residual: f64,
    pub in_range: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub invariant: bool,
    /// `A range(i) <= range(i)`, which certifies invariance for every t.
    pub generator_condition: bool,
    pub generator_residual: f64,
    pub samples: Vec<InvarianceSample>,
    /// Set when the sampled and generator-level verdicts disagree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy: Option<String>,
    /// Generator of S_H in orthonormal H-coordinates, `i^+ A i`.
    #[serde(skip)]
    pub a_h: Option<Mat>,
}

pub fn check_invariance(
    model: &OuModel,
    times: &[f64],
    tol: &Tolerances,
) -> Result<InvarianceReport> {
    if times.is_empty() {
        return Err(OuError::InvalidInput(
            "invariance needs at least one sample time".into(),
        ));
    }
    if let Some(bad) = times.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
        return Err(OuError::InvalidInput(format!(
            "sample times must be finite and > 0, got {bad}"
        )));
    }
    model.ensure_dense()?;
    if let Some(d) = model.diagonal_data() {
        return Ok(InvarianceReport {
            invariant: true,
            generator_condition: true,
            generator_residual: 0.0,
            samples: times
                .iter()
                .map(|&t| InvarianceSample {
                    t,
                    residual: 0.0,
                    in_range: true,
                })
                .collect(),
            discrepancy: None,
            a_h: Some(Mat::from_diagonal(&Vector::from_iterator(
                d.a.len(),
                d.a.iter().map(|a| -a),
            ))),
        });
    }
    let i = model.noise();
    let pinv = Pinv::new(i, tol);
    let ai = model.drift() * i;
    let (a_h, gen_res, gen_ok) = pinv.solve_columns(&ai)?;
    let generator_residual = gen_res / (1.0 + ai.norm());

    let mut samples = Vec::with_capacity(times.len());
    for &t in times {
        let si = model.semigroup(t, tol)? * i;
        let (_, res, ok) = pinv.solve_columns(&si)?;
        samples.push(InvarianceSample {
            t,
            residual: res / (1.0 + si.norm()),
            in_range: ok,
        });
    }
    let sampled = samples.iter().all(|s| s.in_range);
    let discrepancy = (sampled != gen_ok).then(|| {
        format!(
            "generator condition {} but sampled S(t)-invariance {}",
            if gen_ok { "holds" } else { "fails" },
            if sampled { "holds" } else { "fails" }
        )
    });
    Ok(InvarianceReport {
        invariant: sampled && gen_ok,
        generator_condition: gen_ok,
        generator_residual,
        samples,
        discrepancy,
        a_h: gen_ok.then_some(a_h),
    })
}

/// S_H in orthonormal H-coordinates: `i e^{t a_h} = e^{tA} i`.
#[derive(Debug, Clone)]
pub struct RestrictedSemigroup {
    pub a_h: Mat,
    pub invariant: bool,
    pub contraction: bool,
    /// max Re spec(a_h)
    pub growth_bound: f64,
}

impl RestrictedSemigroup {
    pub fn new(model: &OuModel, tol: &Tolerances) -> Result<Self> {
        let report = check_invariance(model, &DEFAULT_INVARIANCE_TIMES, tol)?;
        let a_h = match (report.invariant, report.a_h) {
            (true, Some(a_h)) => a_h,
            _ => return Err(OuError::NotInvariant),
        };
        let growth_bound = spectral_abscissa(&a_h)?;
        let contraction = contraction_criterion(model, tol).contractive;
        Ok(Self {
            a_h,
            invariant: true,
            contraction,
            growth_bound,
        })
    }

    pub fn at(&self, t: f64, tol: &Tolerances) -> Result<Mat> {
        expm(&self.a_h, t, tol)
    }

    /// Operator norm of S_H(t) on H.
    pub fn h_norm(&self, t: f64, tol: &Tolerances) -> Result<f64> {
        Ok(spectral_norm(&self.at(t, tol)?))
    }

    /// |a a^T - a^T a|_F / |a|_F^2
    pub fn normality_defect(&self) -> f64 {
        let a = &self.a_h;
        let scale = a.norm_squared();
        if scale == 0.0 {
            return 0.0;
        }
        (a * a.transpose() - a.transpose() * a).norm() / scale
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionVerdict {
    pub contractive: bool,
    pub lambda_max: f64,
    /// sym(AQ)
    #[serde(skip)]
    pub witness: Mat,
}

/// S_H is a contraction iff `AQ + QA^T <= 0`.
pub fn contraction_criterion(model: &OuModel, tol: &Tolerances) -> ContractionVerdict {
    let witness = match model.diagonal_data() {
        Some(d) => Mat::from_diagonal(&Vector::from_iterator(
            d.q.len(),
            d.q.iter().zip(&d.a).map(|(q, a)| -q * a),
        )),
        None => symmetrize(&(model.drift() * model.covariance())),
    };
    let lambda_max = sym_eigen_desc(&witness).0[0];
    ContractionVerdict {
        contractive: lambda_max <= tol.sym * witness.norm().max(1.0),
        lambda_max,
        witness,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationEstimate {
    /// |S(t) h|_{H_t}
    pub ht_norm: f64,
    /// `(1/t^2) int_0^t |S_H(s) h|_H^2 ds`, the energy of the control
    /// `u(s) = S_H(s) h / t` which steers 0 to S(t) h.
    pub bound: f64,
    pub holds: bool,
}

fn h_coordinates(model: &OuModel, h: &Vector, tol: &Tolerances) -> Result<Vector> {
    let pinv = Pinv::new(model.noise(), tol);
    let sol = pinv.solve(h)?;
    if !sol.in_range {
        return Err(OuError::NotInRange {
            residual: sol.residual,
        });
    }
    Ok(sol.solution)
}

pub fn regularization_estimate(
    model: &OuModel,
    t: f64,
    h: &Vector,
    tol: &Tolerances,
) -> Result<RegularizationEstimate> {
    if !(t.is_finite() && t > 0.0) {
        return Err(OuError::InvalidInput(format!(
            "time must be finite and > 0, got {t}"
        )));
    }
    let sh = RestrictedSemigroup::new(model, tol)?;
    let u = h_coordinates(model, h, tol)?;
    if u.norm() == 0.0 {
        return Ok(RegularizationEstimate {
            ht_norm: 0.0,
            bound: 0.0,
            holds: true,
        });
    }
    let ht = build_ht(model, t, tol)?;
    let ht_norm = ht.norm(&(model.semigroup(t, tol)? * h))?;
    let rate = spectral_norm(&sh.a_h);
    let energy = integrate_graded(
        |s| Ok((sh.at(s, tol)? * &u).norm_squared()),
        t,
        rate,
        tol.quad,
        tol.quad_max_doublings,
    )?
    .value;
    let bound = energy / (t * t);
    Ok(RegularizationEstimate {
        ht_norm,
        bound,
        holds: ht_norm * ht_norm <= bound * (1.0 + 1e-6),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIdentity {
    /// int_0^t |S_H(s) h|_{H_t}^2 ds
    pub lhs: f64,
    /// |h|_H^2
    pub rhs: f64,
    pub panels: usize,
}

/// For normal S_H, `int_0^t |S_H(s) h|_{H_t}^2 ds = |h|_H^2`.
pub fn normal_energy_identity(
    model: &OuModel,
    t: f64,
    h: &Vector,
    tol: &Tolerances,
) -> Result<EnergyIdentity> {
    if !(t.is_finite() && t > 0.0) {
        return Err(OuError::InvalidInput(format!(
            "time must be finite and > 0, got {t}"
        )));
    }
    let sh = RestrictedSemigroup::new(model, tol)?;
    let defect = sh.normality_defect();
    if defect > tol.normality {
        return Err(OuError::NonNormal { defect });
    }
    let u = h_coordinates(model, h, tol)?;
    let rhs = u.norm_squared();
    if rhs == 0.0 {
        return Ok(EnergyIdentity {
            lhs: 0.0,
            rhs: 0.0,
            panels: 0,
        });
    }
    let ht = build_ht(model, t, tol)?;
    let i = model.noise();
    let rate = spectral_norm(&sh.a_h);
    let res = integrate_graded(
        |s| {
            let state = i * (sh.at(s, tol)? * &u);
            reach_norm_squared(&ht, &state)
        },
        t,
        rate,
        tol.quad,
        tol.quad_max_doublings,
    )?;
    Ok(EnergyIdentity {
        lhs: res.value,
        rhs,
        panels: res.panels,
    })
}

fn reach_norm_squared(ht: &RkhsSpace, state: &Vector) -> Result<f64> {
    let n = ht.norm(state)?;
    if n.is_finite() {
        Ok(n * n)
    } else {
        Err(OuError::NotInRange {
            residual: state.norm(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongFellerVerdict {
    pub t: f64,
    /// S(t) E <= H_t
    pub holds: bool,
    /// rank [i, Ai, ..., A^{n-1} i]
    pub kalman_rank: usize,
    pub gramian_rank: usize,
    /// sup <S S^T x, x> / <Q_t x, x>
    #[serde(with = "crate::io::extended_float")]
    pub domination_m: f64,
    /// S(t) E <= H, reported only when H is invariant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_case: Option<bool>,
}

pub fn strong_feller(model: &OuModel, t: f64, tol: &Tolerances) -> Result<StrongFellerVerdict> {
    if !(t.is_finite() && t > 0.0) {
        return Err(OuError::InvalidInput(format!(
            "time must be finite and > 0, got {t}"
        )));
    }
    model.ensure_dense()?;
    let q_t = match model.diagonal_data() {
        Some(d) => Mat::from_diagonal(&Vector::from_vec(
            crate::covariance::gramian_diagonal_closed_form(&d.q, &d.a, t),
        )),
        None => gramian_quadrature(model, t, tol)?.value,
    };
    let s = model.semigroup(t, tol)?;
    let dom = pencil_sup_ratio(&symmetrize(&(&s * s.transpose())), &q_t, tol)?;
    let kalman_rank = kalman_rank(model, tol);
    let gramian_rank = numerical_rank(&q_t, tol);
    let invariant_case = match check_invariance(model, &DEFAULT_INVARIANCE_TIMES, tol)?.invariant {
        true => {
            let pinv = Pinv::new(model.noise(), tol);
            Some(pinv.solve_columns(&s)?.2)
        }
        false => None,
    };
    Ok(StrongFellerVerdict {
        t,
        holds: dom.sup_ratio.is_finite(),
        kalman_rank,
        gramian_rank,
        domination_m: dom.sup_ratio,
        invariant_case,
    })
}

/// Orthonormal basis of the reachable subspace, the range of the
/// controllability matrix of `(A / |A|, i)`. It is A-invariant.
pub fn reachable_basis(model: &OuModel, tol: &Tolerances) -> Mat {
    let n = model.dim();
    let i = model.noise();
    let a = model.drift();
    let scale = spectral_norm(a);
    let a = if scale > 0.0 { a / scale } else { a.clone() };
    let m = i.ncols();
    let mut k = Mat::zeros(n, n * m);
    let mut block = i.clone();
    for j in 0..n {
        k.columns_mut(j * m, m).copy_from(&block);
        block = &a * block;
    }
    Pinv::new(&k, tol).range_basis().clone()
}

/// Rank of the controllability matrix of `(A / |A|, i)`.
pub fn kalman_rank(model: &OuModel, tol: &Tolerances) -> usize {
    reachable_basis(model, tol).ncols()
}
