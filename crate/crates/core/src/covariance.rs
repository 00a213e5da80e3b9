//! Gramians `Q_t = int_0^t S(s) Q S(s)^T ds`, the invariant covariance `Q_inf`
//! and the algebraic identities tying them together.

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{OuError, Result};
use crate::linalg::{
    pencil_eigenvalues, solve_continuous_lyapunov, spectral_abscissa, spectral_norm, symmetrize,
    ExpmFamily, Mat, PsdSplit, Vector,
};
use crate::model::OuModel;
use crate::quadrature::{integrate_graded, QuadratureResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Quadrature,
    LyapunovIdentity,
    ClosedFormDiagonal,
}

/// Gramian by composite Gauss-Legendre quadrature with panel doubling.
pub fn gramian_quadrature(
    model: &OuModel,
    t: f64,
    tol: &Tolerances,
) -> Result<QuadratureResult<Mat>> {
    if !(t.is_finite() && t > 0.0) {
        return Err(OuError::InvalidInput(format!(
            "Gramian time must be finite and > 0, got {t}"
        )));
    }
    model.ensure_dense()?;
    if let Some(d) = model.diagonal_data() {
        let rate = d.a.iter().copied().fold(0.0, f64::max);
        let res = integrate_graded(
            |s| {
                Ok(Vector::from_iterator(
                    d.q.len(),
                    d.q.iter().zip(&d.a).map(|(q, a)| q * (-2.0 * a * s).exp()),
                ))
            },
            t,
            rate,
            tol.quad,
            tol.quad_max_doublings,
        )?;
        return Ok(QuadratureResult {
            value: Mat::from_diagonal(&res.value),
            panels: res.panels,
            change: res.change,
        });
    }
    let family = ExpmFamily::new(model.drift(), tol)?;
    let q = model.covariance();
    let rate = spectral_norm(model.drift());
    let res = integrate_graded(
        |s| {
            let e = family.at(s)?;
            Ok(&e * q * e.transpose())
        },
        t,
        rate,
        tol.quad,
        tol.quad_max_doublings,
    )?;
    Ok(QuadratureResult {
        value: symmetrize(&res.value),
        ..res
    })
}

/// `diag(q_n (1 - e^{-2 a_n t}) / (2 a_n))`
pub fn gramian_diagonal_closed_form(q: &[f64], a: &[f64], t: f64) -> Vec<f64> {
    q.iter()
        .zip(a)
        .map(|(q, a)| q * -(-2.0 * a * t).exp_m1() / (2.0 * a))
        .collect()
}

#[derive(Debug, Clone)]
pub struct InvariantCovariance {
    pub matrix: Mat,
    pub provenance: Provenance,
    /// |A X + X A^T + Q|_F / |Q|_F
    pub residual: f64,
}

/// Unique solution of `A X + X A^T = -Q` for Hurwitz-stable `A`.
pub fn solve_lyapunov(model: &OuModel, tol: &Tolerances) -> Result<InvariantCovariance> {
    if let Some(d) = model.diagonal_data() {
        model.ensure_dense()?;
        let x = Mat::from_diagonal(&Vector::from_iterator(
            d.q.len(),
            d.q.iter().zip(&d.a).map(|(q, a)| q / (2.0 * a)),
        ));
        return Ok(InvariantCovariance {
            matrix: x,
            provenance: Provenance::ClosedFormDiagonal,
            residual: 0.0,
        });
    }
    let a = model.drift();
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(OuError::NotStable { abscissa });
    }
    let q = model.covariance();
    let x = solve_continuous_lyapunov(a, q, tol.lyap)?;
    let residual = lyapunov_residual(a, &x, q);
    if residual > tol.lyap {
        return Err(OuError::Unrepresentable(format!(
            "Liapunov residual {residual:.3e} exceeds tolerance {:.1e}",
            tol.lyap
        )));
    }
    Ok(InvariantCovariance {
        matrix: x,
        provenance: Provenance::LyapunovIdentity,
        residual,
    })
}

pub fn lyapunov_residual(a: &Mat, x: &Mat, q: &Mat) -> f64 {
    (a * x + x * a.transpose() + q).norm() / q.norm().max(f64::MIN_POSITIVE)
}

/// `Q_t = Q_inf - S(t) Q_inf S(t)^T`
pub fn gramian_from_identity(
    model: &OuModel,
    q_infinity: &Mat,
    t: f64,
    tol: &Tolerances,
) -> Result<Mat> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(OuError::InvalidInput(format!(
            "Gramian time must be finite and >= 0, got {t}"
        )));
    }
    let s = model.semigroup(t, tol)?;
    Ok(symmetrize(&(q_infinity - &s * q_infinity * s.transpose())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSymmetry {
    pub is_symmetric: bool,
    /// |AQ - QA^T|_F / max(1, |AQ|_F)
    pub defect: f64,
}

pub fn check_q_symmetry(model: &OuModel, tol: &Tolerances) -> QSymmetry {
    if model.diagonal_data().is_some() {
        return QSymmetry {
            is_symmetric: true,
            defect: 0.0,
        };
    }
    let aq = model.drift() * model.covariance();
    let defect = (&aq - aq.transpose()).norm() / aq.norm().max(1.0);
    QSymmetry {
        is_symmetric: defect <= tol.sym,
        defect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HqMethod {
    /// A is Hurwitz-stable.
    Stability,
    /// A restricted to the reachable subspace is stable.
    ReachableStability,
    /// tr Q_t plateaus along t = 2^k.
    TracePlateau,
    /// Diagonal series sup q_n / a_n at the truncation.
    Series,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqVerdict {
    pub holds: bool,
    pub method: HqMethod,
    pub abscissa: Option<f64>,
    /// (t, tr Q_t) along the doubling grid when the trace test ran.
    #[serde(with = "crate::io::extended_pairs")]
    pub trace_grid: Vec<(f64, f64)>,
}

const DOUBLING_STEPS: u32 = 12;

/// Decides boundedness of `t -> Q_t`. Without stability, doubles
/// `Q_{2t} = Q_t + S(t) Q_t S(t)^T` from `Q_1` and watches the trace; on a
/// plateau the last iterate is returned as the invariant covariance.
pub fn decide_hq_infinity(
    model: &OuModel,
    tol: &Tolerances,
) -> Result<(HqVerdict, Option<InvariantCovariance>)> {
    if let Some(series) = &model.meta().series {
        if model.dim() > crate::model::MAX_DENSE_DIM {
            let verdict = HqVerdict {
                holds: series.hq_infinity,
                method: HqMethod::Series,
                abscissa: None,
                trace_grid: Vec::new(),
            };
            return Ok((verdict, None));
        }
    }
    model.ensure_dense()?;
    let abscissa = spectral_abscissa(model.drift())?;
    if abscissa < 0.0 {
        let inv = solve_lyapunov(model, tol)?;
        let verdict = HqVerdict {
            holds: true,
            method: HqMethod::Stability,
            abscissa: Some(abscissa),
            trace_grid: Vec::new(),
        };
        return Ok((verdict, Some(inv)));
    }
    if let Some(inv) = reachable_lyapunov(model, tol)? {
        let verdict = HqVerdict {
            holds: true,
            method: HqMethod::ReachableStability,
            abscissa: Some(abscissa),
            trace_grid: Vec::new(),
        };
        return Ok((verdict, Some(inv)));
    }
    let mut t = 1.0;
    let mut q_t = gramian_quadrature(model, t, tol)?.value;
    let mut grid = vec![(t, q_t.trace())];
    let mut holds = false;
    for _ in 0..DOUBLING_STEPS {
        let s = model.semigroup(t, tol)?;
        let next = symmetrize(&(&q_t + &s * &q_t * s.transpose()));
        let (prev_tr, next_tr) = (q_t.trace(), next.trace());
        t *= 2.0;
        q_t = next;
        grid.push((t, next_tr));
        if !next_tr.is_finite() {
            break;
        }
        if (next_tr - prev_tr).abs() <= tol.plateau * next_tr.abs().max(f64::MIN_POSITIVE) {
            holds = true;
            break;
        }
    }
    let inv = holds.then(|| InvariantCovariance {
        residual: lyapunov_residual(model.drift(), &q_t, model.covariance()),
        matrix: q_t,
        provenance: Provenance::Quadrature,
    });
    let verdict = HqVerdict {
        holds,
        method: HqMethod::TracePlateau,
        abscissa: Some(abscissa),
        trace_grid: grid,
    };
    Ok((verdict, inv))
}

/// Noise never leaves the reachable subspace V, so when `V^T A V` is stable
/// `Q_inf = V X V^T` with X the Liapunov solution of the compressed pair.
fn reachable_lyapunov(model: &OuModel, tol: &Tolerances) -> Result<Option<InvariantCovariance>> {
    let basis = crate::restriction::reachable_basis(model, tol);
    if basis.ncols() == 0 || basis.ncols() == model.dim() {
        return Ok(None);
    }
    let a_c = basis.transpose() * model.drift() * &basis;
    if spectral_abscissa(&a_c)? >= 0.0 {
        return Ok(None);
    }
    let q_c = symmetrize(&(basis.transpose() * model.covariance() * &basis));
    let x = solve_continuous_lyapunov(&a_c, &q_c, tol.lyap)?;
    let matrix = symmetrize(&(&basis * x * basis.transpose()));
    let residual = lyapunov_residual(model.drift(), &matrix, model.covariance());
    if residual > tol.lyap {
        return Ok(None);
    }
    Ok(Some(InvariantCovariance {
        matrix,
        provenance: Provenance::LyapunovIdentity,
        residual,
    }))
}

/// `Q_inf` by whichever route applies, or `MissingInvariantCovariance`.
pub fn invariant_covariance(model: &OuModel, tol: &Tolerances) -> Result<InvariantCovariance> {
    match decide_hq_infinity(model, tol)? {
        (_, Some(inv)) => Ok(inv),
        (_, None) => Err(OuError::MissingInvariantCovariance),
    }
}

#[derive(Debug, Clone)]
pub struct GramianEntry {
    pub t: f64,
    pub matrix: Mat,
    pub provenance: Provenance,
}

/// Time-indexed Gramians sorted by time, with `Q_inf` when it exists.
#[derive(Debug, Clone)]
pub struct GramianFamily {
    pub model_name: String,
    pub entries: Vec<GramianEntry>,
    pub q_infinity: Option<InvariantCovariance>,
    pub hq_infinity: HqVerdict,
}

impl GramianFamily {
    pub fn assemble(model: &OuModel, times: &[f64], tol: &Tolerances) -> Result<Self> {
        model.ensure_dense()?;
        let (hq_infinity, q_infinity) = decide_hq_infinity(model, tol)?;
        let mut sorted: Vec<f64> = times.to_vec();
        if let Some(bad) = sorted.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(OuError::InvalidInput(format!(
                "Gramian times must be finite and > 0, got {bad}"
            )));
        }
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut entries = Vec::with_capacity(sorted.len());
        for &t in &sorted {
            let (matrix, provenance) = match (model.diagonal_data(), &q_infinity) {
                (Some(d), _) => (
                    Mat::from_diagonal(&Vector::from_vec(gramian_diagonal_closed_form(
                        &d.q, &d.a, t,
                    ))),
                    Provenance::ClosedFormDiagonal,
                ),
                (None, Some(inv)) if inv.provenance == Provenance::LyapunovIdentity => (
                    gramian_from_identity(model, &inv.matrix, t, tol)?,
                    Provenance::LyapunovIdentity,
                ),
                _ => (
                    gramian_quadrature(model, t, tol)?.value,
                    Provenance::Quadrature,
                ),
            };
            entries.push(GramianEntry {
                t,
                matrix,
                provenance,
            });
        }
        Ok(Self {
            model_name: model.name().to_string(),
            entries,
            q_infinity,
            hq_infinity,
        })
    }

    pub fn at(&self, t: f64) -> Option<&Mat> {
        self.entries.iter().find(|e| e.t == t).map(|e| &e.matrix)
    }

    pub fn q_infinity(&self) -> Result<&Mat> {
        self.q_infinity
            .as_ref()
            .map(|inv| &inv.matrix)
            .ok_or(OuError::MissingInvariantCovariance)
    }

    /// Worst violation of `Q_s <= Q_t` (s <= t) and `Q_t <= Q_inf`, measured as
    /// the most negative eigenvalue of the difference relative to its scale;
    /// also the most negative eigenvalue of any stored Gramian.
    pub fn order_defect(&self, tol: &Tolerances) -> f64 {
        let neg = |m: &Mat| {
            let split = PsdSplit::new(&symmetrize(m), tol);
            -split.min_eigenvalue / m.norm().max(1.0)
        };
        let mut worst = 0.0_f64;
        for e in &self.entries {
            worst = worst.max(neg(&e.matrix));
        }
        for w in self.entries.windows(2) {
            worst = worst.max(neg(&(&w[1].matrix - &w[0].matrix)));
        }
        if let Some(inv) = &self.q_infinity {
            for e in &self.entries {
                worst = worst.max(neg(&(&inv.matrix - &e.matrix)));
            }
        }
        worst
    }
}

/// Generalized eigenvalues of `(Q_t - Q_s, Q_t)`; all must be >= 0 for s <= t.
pub fn monotonicity_spectrum(q_s: &Mat, q_t: &Mat, tol: &Tolerances) -> Result<Vector> {
    pencil_eigenvalues(&symmetrize(&(q_t - q_s)), q_t, tol)
}
