//! Headline verdicts: spectral gap, Q-symmetry, analyticity of the transition
//! semigroup with its certificates, and the implications linking analyticity
//! of `P` to that of the restricted semigroup `S_H`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chaos::Whitening;
use crate::config::Tolerances;
use crate::covariance::{
    check_q_symmetry, decide_hq_infinity, gramian_diagonal_closed_form, HqVerdict, QSymmetry,
};
use crate::error::{OuError, Result};
use crate::io::{extended_float, extended_float_opt, mat_rows};
use crate::linalg::{
    cap_infinite, pencil_eigenvalues, pencil_sup_ratio, sector_constant, solve_continuous_lyapunov,
    spectral_abscissa, spectral_norm, sym_eigen_desc, symmetrize, ComplexEigen, Mat, Pinv,
    PsdSplit, Vector,
};
use crate::model::{ModelKind, OuModel, SeriesVerdicts};
use crate::restriction::{
    check_invariance, contraction_criterion, strong_feller, StrongFellerVerdict,
    DEFAULT_INVARIANCE_TIMES,
};
use crate::rkhs::{build_ht, equivalent_norms, RkhsSpace};

pub const GAP_CHECK_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const GAP_CHECK_SLACK: f64 = 1e-8;
pub const STRONG_FELLER_TIMES: [f64; 3] = [0.01, 0.1, 1.0];
pub const GAP_EQUIVALENCE_TIMES: [f64; 3] = [0.5, 1.0, 2.0];

/// The invariant covariance in a form usable at any truncation.
enum Invariant {
    Diagonal {
        q: Vec<f64>,
        a: Vec<f64>,
    },
    Dense {
        q_inf: Mat,
        whitening: Box<Whitening>,
    },
}

impl Invariant {
    fn new(model: &OuModel, tol: &Tolerances) -> Result<Self> {
        if let Some(d) = model.diagonal_data() {
            return Ok(Invariant::Diagonal {
                q: d.q.clone(),
                a: d.a.clone(),
            });
        }
        let q_inf = crate::covariance::invariant_covariance(model, tol)?.matrix;
        let whitening = Whitening::new(model, &q_inf, tol)?;
        Ok(Invariant::Dense {
            q_inf,
            whitening: Box::new(whitening),
        })
    }

    fn s_infinity_norm(&self, t: f64) -> Result<f64> {
        match self {
            Invariant::Diagonal { a, .. } => {
                Ok(a.iter().map(|a| (-a * t).exp()).fold(0.0, f64::max))
            }
            Invariant::Dense { whitening, .. } => Ok(spectral_norm(&whitening.c_of_t(t)?)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSample {
    pub t: f64,
    pub s_infinity_norm: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGap {
    pub holds: bool,
    /// `sup <Q_inf x, x> / <Q x, x>`
    #[serde(rename = "M_star", with = "extended_float")]
    pub m_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_star_raw: Option<f64>,
    /// `1 / (2 M_star)`
    #[serde(default, with = "extended_float_opt")]
    pub gap_omega: Option<f64>,
    /// Spectral abscissa of the drift in whitened invariant coordinates.
    #[serde(rename = "growth_bound_A_infinity")]
    pub growth_bound_a_infinity: f64,
    pub samples: Vec<GapSample>,
    pub bound_verified: bool,
    /// Direction attaining `M_star`, or a kernel direction of Q outside ker Q_inf.
    #[serde(skip)]
    pub witness: Option<Vector>,
}

fn gap_from(model: &OuModel, inv: &Invariant, tol: &Tolerances) -> Result<SpectralGap> {
    let (m_star, witness, growth) = match inv {
        Invariant::Diagonal { a, .. } => {
            // (Q_inf / Q)_n = 1 / (2 a_n)
            let (k, amin) =
                a.iter()
                    .copied()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |acc, (k, v)| if v < acc.1 { (k, v) } else { acc },
                    );
            let mut w = Vector::zeros(a.len());
            w[k] = 1.0;
            (0.5 / amin, Some(w), -amin)
        }
        Invariant::Dense { q_inf, whitening } => {
            let res = pencil_sup_ratio(q_inf, model.covariance(), tol)?;
            let growth = ComplexEigen::new(whitening.drift())?.abscissa();
            (res.sup_ratio, res.argmax_vector, growth)
        }
    };
    let (m_star, m_star_raw) = cap_infinite(m_star, tol.infinity_cap);
    let holds = m_star.is_finite();
    let gap_omega = holds.then(|| 0.5 / m_star);
    let mut samples = Vec::new();
    if let Some(omega) = gap_omega {
        for t in GAP_CHECK_TIMES {
            let norm = inv.s_infinity_norm(t)?;
            let bound = (-omega * t).exp();
            samples.push(GapSample {
                t,
                s_infinity_norm: norm,
                bound,
                ok: norm <= bound + GAP_CHECK_SLACK,
            });
        }
    }
    Ok(SpectralGap {
        holds,
        m_star,
        m_star_raw,
        gap_omega,
        growth_bound_a_infinity: growth,
        bound_verified: samples.iter().all(|s| s.ok),
        samples,
        witness,
    })
}

pub fn spectral_gap(model: &OuModel, tol: &Tolerances) -> Result<SpectralGap> {
    gap_from(model, &Invariant::new(model, tol)?, tol)
}

/// `|S_inf(t)|` on `H_inf`: the square root of the top eigenvalue of the
/// pencil `(S(t) Q_inf S(t)^T, Q_inf)` on range(Q_inf).
pub fn s_infinity_norm(model: &OuModel, t: f64, tol: &Tolerances) -> Result<f64> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(OuError::InvalidInput(format!(
            "time must be finite and >= 0, got {t}"
        )));
    }
    Invariant::new(model, tol)?.s_infinity_norm(t)
}

/// All eigenvalues of the pencil `(S(t) Q_inf S(t)^T, Q_inf)` on range(Q_inf), decreasing.
pub fn s_infinity_pencil(model: &OuModel, t: f64, tol: &Tolerances) -> Result<Vector> {
    let q_inf = crate::covariance::invariant_covariance(model, tol)?.matrix;
    let s = model.semigroup(t, tol)?;
    pencil_eigenvalues(&symmetrize(&(&s * &q_inf * s.transpose())), &q_inf, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Analytic,
    NotAnalytic,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analyticity {
    /// `Q A^T v = 0` for every `v` in ker Q.
    pub kernel_condition_ok: bool,
    /// max over an orthonormal basis of ker Q of `|Q A^T v| / max(1, |Q| |A|)`.
    pub kernel_defect: f64,
    #[serde(with = "extended_float")]
    pub sector_constant_b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_raw: Option<f64>,
    /// Least `C` with `|A Q_inf x|_H <= C |i^T x|`.
    #[serde(rename = "C_bound", with = "extended_float")]
    pub c_bound: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bound_raw: Option<f64>,
    pub verdict: Verdict,
    /// The two certificates disagree.
    pub flagged: bool,
    #[serde(skip)]
    pub kernel_witness: Option<Vector>,
    #[serde(skip)]
    pub c_bound_witness: Option<Vector>,
    #[serde(skip)]
    pub sector_angle: f64,
}

fn kernel_condition(model: &OuModel, tol: &Tolerances) -> (bool, f64, Option<Vector>) {
    let q = model.covariance();
    let a = model.drift();
    let kernel = PsdSplit::new(q, tol).kernel;
    if kernel.ncols() == 0 {
        return (true, 0.0, None);
    }
    let image = q * a.transpose() * &kernel;
    let scale = (spectral_norm(q) * spectral_norm(a)).max(1.0);
    let (col, norm) = image
        .column_iter()
        .map(|c| c.norm())
        .enumerate()
        .fold((0, 0.0), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    let defect = norm / scale;
    let witness = (defect > tol.sym).then(|| kernel.column(col).into_owned());
    (defect <= tol.sym, defect, witness)
}

fn analyticity_from(model: &OuModel, inv: &Invariant, tol: &Tolerances) -> Result<Analyticity> {
    let Invariant::Dense { q_inf, whitening } = inv else {
        // Self-adjoint diagonal drift: real numerical range, |A Q_inf x|_H^2 = <Q x, x> / 4.
        return Ok(Analyticity {
            kernel_condition_ok: true,
            kernel_defect: 0.0,
            sector_constant_b: 0.0,
            sector_raw: None,
            c_bound: 0.5,
            c_bound_raw: None,
            verdict: Verdict::Analytic,
            flagged: false,
            kernel_witness: None,
            c_bound_witness: None,
            sector_angle: std::f64::consts::FRAC_PI_2,
        });
    };
    let (kernel_ok, kernel_defect, kernel_witness) = kernel_condition(model, tol);
    let sector = sector_constant(&whitening.drift().transpose(), tol);

    let aq = model.drift() * q_inf;
    let (g, _, in_range) = Pinv::new(model.noise(), tol).solve_columns(&aq)?;
    let (c_sq, c_witness) = if in_range {
        let res = pencil_sup_ratio(&symmetrize(&(g.transpose() * &g)), model.covariance(), tol)?;
        (res.sup_ratio, res.argmax_vector)
    } else {
        (f64::INFINITY, None)
    };
    let (c_bound, c_bound_raw) = cap_infinite(c_sq.sqrt(), tol.infinity_cap);

    let (verdict, flagged) = if !kernel_ok {
        (
            Verdict::NotAnalytic,
            c_bound.is_finite() || sector.b.is_finite(),
        )
    } else {
        match (sector.b.is_finite(), c_bound.is_finite()) {
            (true, true) => (Verdict::Analytic, false),
            (false, false) => (Verdict::NotAnalytic, false),
            _ => (Verdict::Inconclusive, true),
        }
    };
    Ok(Analyticity {
        kernel_condition_ok: kernel_ok,
        kernel_defect,
        sector_constant_b: sector.b,
        sector_raw: sector.raw,
        c_bound,
        c_bound_raw,
        verdict,
        flagged,
        kernel_witness,
        c_bound_witness: c_witness,
        sector_angle: sector.critical_angle,
    })
}

pub fn analyticity(model: &OuModel, tol: &Tolerances) -> Result<Analyticity> {
    analyticity_from(model, &Invariant::new(model, tol)?, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

pub const CHECK_RESTRICTION_ANALYTIC: &str =
    "analytic-with-hinf-in-h-implies-bounded-analytic-restriction";
pub const CHECK_TRANSITION_ANALYTIC: &str = "renormable-analytic-restriction-implies-analytic";
pub const CHECK_GAP_EQUIVALENCE: &str = "gap-equivalence";

/// A norm `|x|_X = |X^{1/2} x|` in which `e^{t a}` is contractive and
/// analytic: `X = I` when `sym(a) <= 0`, else the Liapunov solution of
/// `a^T X + X a = -I` for stable `a`.
#[derive(Debug, Clone)]
pub struct RenormingCertificate {
    pub metric: Mat,
    /// Sector constant of `X^{1/2} a X^{-1/2}`.
    pub sector_b: f64,
    pub identity: bool,
}

pub fn renorming_certificate(a: &Mat, tol: &Tolerances) -> Result<Option<RenormingCertificate>> {
    let n = a.nrows();
    let scale = spectral_norm(a).max(1.0);
    let lmax = sym_eigen_desc(&symmetrize(a)).0[0];
    if lmax <= tol.sym * scale {
        let s = sector_constant(a, tol);
        if s.b.is_finite() {
            return Ok(Some(RenormingCertificate {
                metric: Mat::identity(n, n),
                sector_b: s.b,
                identity: true,
            }));
        }
    }
    if spectral_abscissa(a)? >= 0.0 {
        return Ok(None);
    }
    let x = symmetrize(&solve_continuous_lyapunov(
        &a.transpose(),
        &Mat::identity(n, n),
        tol.lyap,
    )?);
    let split = PsdSplit::new(&x, tol);
    if split.rank() < n {
        return Ok(None);
    }
    let root = split.sqrt();
    let inv_root =
        crate::linalg::scale_columns(&split.range, &split.values.map(|v| 1.0 / v.sqrt()))
            * split.range.transpose();
    let similar = &root * a * &inv_root;
    let s = sector_constant(&similar, tol);
    Ok(s.b.is_finite().then_some(RenormingCertificate {
        metric: x,
        sector_b: s.b,
        identity: false,
    }))
}

struct Restriction {
    invariant: bool,
    a_h: Option<Mat>,
}

fn restriction_of(model: &OuModel, tol: &Tolerances) -> Result<Restriction> {
    if let Some(d) = model.diagonal_data() {
        // i = diag(sqrt q) so a_h = diag(-a)
        let a_h = (model.dim() <= crate::model::MAX_DENSE_DIM)
            .then(|| Mat::from_diagonal(&Vector::from_iterator(d.a.len(), d.a.iter().map(|a| -a))));
        return Ok(Restriction {
            invariant: true,
            a_h,
        });
    }
    let report = check_invariance(model, &DEFAULT_INVARIANCE_TIMES, tol)?;
    Ok(Restriction {
        invariant: report.invariant,
        a_h: if report.invariant { report.a_h } else { None },
    })
}

fn check(name: &str, status: CheckStatus, detail: impl Into<String>) -> CrossCheck {
    CrossCheck {
        name: name.into(),
        status,
        detail: detail.into(),
    }
}

fn cross_checks_from(
    model: &OuModel,
    gap: &SpectralGap,
    analytic: &Analyticity,
    restriction: &Restriction,
    tol: &Tolerances,
) -> Result<Vec<CrossCheck>> {
    let diagonal = model.kind() == ModelKind::Diagonal || model.diagonal_data().is_some();
    let mut out = Vec::with_capacity(3);

    let premise = analytic.verdict == Verdict::Analytic && gap.holds;
    out.push(if !premise {
        check(
            CHECK_RESTRICTION_ANALYTIC,
            CheckStatus::NotApplicable,
            format!(
                "verdict {:?}, M_star finite {}",
                analytic.verdict, gap.holds
            ),
        )
    } else if !restriction.invariant {
        check(
            CHECK_RESTRICTION_ANALYTIC,
            CheckStatus::Fail,
            "H is not invariant",
        )
    } else if diagonal {
        check(
            CHECK_RESTRICTION_ANALYTIC,
            CheckStatus::Pass,
            "self-adjoint diagonal restriction, sector 0",
        )
    } else {
        let a_h = restriction.a_h.as_ref().expect("invariant dense model");
        match renorming_certificate(a_h, tol)? {
            Some(c) if spectral_abscissa(a_h)? < 0.0 || c.identity => check(
                CHECK_RESTRICTION_ANALYTIC,
                CheckStatus::Pass,
                format!(
                    "sector {} in the {} norm",
                    c.sector_b,
                    if c.identity { "H" } else { "Liapunov" }
                ),
            ),
            _ => check(
                CHECK_RESTRICTION_ANALYTIC,
                CheckStatus::Fail,
                "no bounded analytic certificate for a_h",
            ),
        }
    });

    let certificate = if !restriction.invariant {
        None
    } else if diagonal {
        Some((0.0, true))
    } else {
        let a_h = restriction.a_h.as_ref().expect("invariant dense model");
        renorming_certificate(a_h, tol)?.map(|c| (c.sector_b, c.identity))
    };
    out.push(match certificate {
        None => check(
            CHECK_TRANSITION_ANALYTIC,
            CheckStatus::NotApplicable,
            if restriction.invariant {
                "no contractive renorming found"
            } else {
                "H is not invariant"
            },
        ),
        Some((b, identity)) => {
            let status = if analytic.verdict == Verdict::Analytic {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            };
            check(
                CHECK_TRANSITION_ANALYTIC,
                status,
                format!(
                    "a_h sector {b} in the {} norm; verdict {:?}",
                    if identity { "H" } else { "Liapunov" },
                    analytic.verdict
                ),
            )
        }
    });

    out.push(if !restriction.invariant {
        check(
            CHECK_GAP_EQUIVALENCE,
            CheckStatus::NotApplicable,
            "H is not invariant",
        )
    } else if diagonal {
        let stable = gap.growth_bound_a_infinity < 0.0;
        let status = if stable == gap.holds {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        check(
            CHECK_GAP_EQUIVALENCE,
            status,
            format!(
                "growth {} M_star finite {}",
                gap.growth_bound_a_infinity, gap.holds
            ),
        )
    } else {
        let a_h = restriction.a_h.as_ref().expect("invariant dense model");
        let stable = spectral_abscissa(a_h)? < 0.0;
        let hinf = RkhsSpace::from_gram(&Invariant::q_inf_dense(model, tol)?, tol)?;
        let mut equivalent = true;
        for t in GAP_EQUIVALENCE_TIMES {
            equivalent &= equivalent_norms(&build_ht(model, t, tol)?, &hinf, tol)?.equivalent;
        }
        let agree = stable == gap.holds && gap.holds == equivalent;
        check(
            CHECK_GAP_EQUIVALENCE,
            if agree {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            format!(
                "a_h stable {stable}, M_star finite {}, H_t ~ H_inf {equivalent}",
                gap.holds
            ),
        )
    });
    Ok(out)
}

impl Invariant {
    fn q_inf_dense(model: &OuModel, tol: &Tolerances) -> Result<Mat> {
        Ok(crate::covariance::invariant_covariance(model, tol)?.matrix)
    }
}

pub fn cross_checks(model: &OuModel, tol: &Tolerances) -> Result<Vec<CrossCheck>> {
    let inv = Invariant::new(model, tol)?;
    let gap = gap_from(model, &inv, tol)?;
    let analytic = analyticity_from(model, &inv, tol)?;
    cross_checks_from(model, &gap, &analytic, &restriction_of(model, tol)?, tol)
}

/// Evidence behind the verdicts, sufficient to re-check them independently.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Certificates {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_infinity: Option<Vec<Vec<f64>>>,
    /// Diagonal of `Q_inf` for diagonal models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_infinity_diagonal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_star_witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bound_witness: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_critical_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction_lambda_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted_generator: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strong_feller: Vec<StrongFellerVerdict>,
}

/// Witness vectors are embedded only up to this dimension.
pub const WITNESS_MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub model: String,
    pub kind: ModelKind,
    pub dim: usize,
    pub q_symmetric: QSymmetry,
    pub h_invariant: bool,
    pub s_h_contractive: bool,
    pub hq_infinity: bool,
    pub hq_infinity_detail: HqVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<SpectralGap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyticity: Option<Analyticity>,
    pub strong_feller_at: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesVerdicts>,
    pub cross_checks: Vec<CrossCheck>,
    pub certificates: Certificates,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn small_vec(v: &Option<Vector>) -> Option<Vec<f64>> {
    v.as_ref()
        .filter(|v| v.len() <= WITNESS_MAX_DIM)
        .map(|v| v.iter().copied().collect())
}

fn strong_feller_diagonal(q: &[f64], a: &[f64], t: f64) -> StrongFellerVerdict {
    let q_t = gramian_diagonal_closed_form(q, a, t);
    let m = a
        .iter()
        .zip(&q_t)
        .map(|(a, qt)| (-2.0 * a * t).exp() / qt)
        .fold(0.0, f64::max);
    StrongFellerVerdict {
        t,
        holds: q_t.iter().all(|&v| v > 0.0),
        kalman_rank: q.len(),
        gramian_rank: q_t.iter().filter(|&&v| v > 0.0).count(),
        domination_m: m,
        invariant_case: Some(true),
    }
}

pub fn analyze(model: &OuModel, tol: &Tolerances) -> Result<DiagnosticsReport> {
    let mut notes = Vec::new();
    let (hq, _) = decide_hq_infinity(model, tol)?;
    let q_symmetric = check_q_symmetry(model, tol);
    let restriction = restriction_of(model, tol)?;
    let contraction =
        if model.dim() <= crate::model::MAX_DENSE_DIM || model.diagonal_data().is_none() {
            Some(contraction_criterion(model, tol))
        } else {
            None
        };
    let s_h_contractive =
        restriction.invariant && contraction.as_ref().is_none_or(|c| c.contractive);

    let mut certificates = Certificates {
        contraction_lambda_max: contraction.as_ref().map(|c| c.lambda_max),
        restricted_generator: restriction
            .a_h
            .as_ref()
            .filter(|a| a.nrows() <= WITNESS_MAX_DIM && model.diagonal_data().is_none())
            .map(mat_rows),
        ..Certificates::default()
    };

    let inv = match Invariant::new(model, tol) {
        Ok(inv) => Some(inv),
        Err(OuError::MissingInvariantCovariance) | Err(OuError::NotStable { .. }) => {
            notes.push("invariant covariance unavailable; gap and analyticity not assessed".into());
            None
        }
        Err(e) => return Err(e),
    };
    let (spectral_gap, analyticity, cross_checks) = match &inv {
        Some(inv) => {
            let gap = gap_from(model, inv, tol)?;
            let an = analyticity_from(model, inv, tol)?;
            let checks = cross_checks_from(model, &gap, &an, &restriction, tol)?;
            match inv {
                Invariant::Dense { q_inf, .. } => {
                    certificates.q_infinity = Some(mat_rows(q_inf));
                    certificates.lyapunov_residual = Some(crate::covariance::lyapunov_residual(
                        model.drift(),
                        q_inf,
                        model.covariance(),
                    ));
                }
                Invariant::Diagonal { q, a } => {
                    certificates.q_infinity_diagonal =
                        Some(q.iter().zip(a).map(|(q, a)| q / (2.0 * a)).collect());
                }
            }
            certificates.m_star_witness = small_vec(&gap.witness);
            certificates.kernel_witness = small_vec(&an.kernel_witness);
            certificates.c_bound_witness = small_vec(&an.c_bound_witness);
            certificates.sector_critical_angle = Some(an.sector_angle);
            if an.flagged {
                notes.push("sector constant and C bound disagree on finiteness".into());
            }
            (Some(gap), Some(an), checks)
        }
        None => (None, None, Vec::new()),
    };

    let mut strong_feller_at = BTreeMap::new();
    for t in STRONG_FELLER_TIMES {
        let verdict = match model.diagonal_data() {
            Some(d) => strong_feller_diagonal(&d.q, &d.a, t),
            None => strong_feller(model, t, tol)?,
        };
        strong_feller_at.insert(format!("{t}"), verdict.holds);
        if model.diagonal_data().is_none() {
            certificates.strong_feller.push(verdict);
        }
    }
    notes.extend(model.meta().notes.iter().cloned());

    Ok(DiagnosticsReport {
        model: model.name().to_string(),
        kind: model.kind(),
        dim: model.dim(),
        q_symmetric,
        h_invariant: restriction.invariant,
        s_h_contractive,
        hq_infinity: hq.holds,
        hq_infinity_detail: hq,
        spectral_gap,
        analyticity,
        strong_feller_at,
        series: model.meta().series.clone(),
        cross_checks,
        certificates,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builders::{build_diagonal, build_paper_2x2, SequenceRule};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn dense(a: &[f64], n: usize) -> OuModel {
        OuModel::new(
            "t",
            Mat::from_row_slice(n, n, a),
            Mat::identity(n, n),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn identity_gap() {
        let g = spectral_gap(&dense(&[-1.0, 0.0, 0.0, -1.0], 2), &tol()).unwrap();
        assert!(g.holds && (g.m_star - 0.5).abs() < 1e-12);
        assert!((g.gap_omega.unwrap() - 1.0).abs() < 1e-12);
        assert!((g.growth_bound_a_infinity + 1.0).abs() < 1e-12);
        assert!(g.bound_verified);
    }

    #[test]
    fn shear_norm_formula() {
        let m = build_paper_2x2();
        for t in [0.1f64, 0.5, 1.0, 2.0, 5.0] {
            let expected = (-t).exp() * (t + (t * t + 1.0f64).sqrt());
            let got = s_infinity_norm(&m, t, &tol()).unwrap();
            assert!(
                (got - expected).abs() <= 1e-8 * expected,
                "t={t}: {got} vs {expected}"
            );
            let pencil = s_infinity_pencil(&m, t, &tol()).unwrap();
            let e2 = (-2.0 * t).exp();
            let r = (t * t + 1.0f64).sqrt();
            assert!((pencil[0] - e2 * (t + r).powi(2)).abs() <= 1e-8 * pencil[0]);
            assert!((pencil[1] - e2 * (t - r).powi(2)).abs() <= 1e-8 * pencil[0]);
        }
    }

    #[test]
    fn shear_not_analytic_and_no_gap() {
        let m = build_paper_2x2();
        let a = analyticity(&m, &tol()).unwrap();
        assert!(!a.kernel_condition_ok);
        assert_eq!(a.verdict, Verdict::NotAnalytic);
        assert!(a.sector_constant_b.is_infinite() && a.c_bound.is_infinite());
        let w = a.kernel_witness.unwrap();
        assert!((w[0].abs() - 1.0).abs() < 1e-12);
        let g = spectral_gap(&m, &tol()).unwrap();
        assert!(!g.holds && g.m_star.is_infinite() && g.gap_omega.is_none());
    }

    #[test]
    fn selfadjoint_is_analytic() {
        let a = analyticity(&dense(&[-2.0, 0.5, 0.5, -1.0], 2), &tol()).unwrap();
        assert_eq!(a.verdict, Verdict::Analytic);
        assert_eq!(a.sector_constant_b, 0.0);
    }

    #[test]
    fn rotation_sector() {
        let a = analyticity(&dense(&[-1.0, 2.0, -2.0, -1.0], 2), &tol()).unwrap();
        assert_eq!(a.verdict, Verdict::Analytic);
        assert!(
            (a.sector_constant_b - 2.0).abs() < 1e-6,
            "{}",
            a.sector_constant_b
        );
    }

    #[test]
    fn diagonal_gap_grows_with_truncation() {
        let q = SequenceRule::PowerLaw { c: 1.0, p: 3.0 };
        let a = SequenceRule::PowerLaw { c: 1.0, p: 1.0 };
        let g = spectral_gap(&build_diagonal(&q, &a, 100).unwrap(), &tol()).unwrap();
        assert!((g.m_star - 50.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_closed_form_matches_dense() {
        let q = SequenceRule::List(vec![1.0, 0.5, 0.25]);
        let a = SequenceRule::List(vec![1.0, 2.0, 0.7]);
        let diag = build_diagonal(&q, &a, 3).unwrap();
        let dense = OuModel::new("d", diag.drift().clone(), diag.noise().clone(), &tol()).unwrap();
        let (gd, gs) = (
            spectral_gap(&diag, &tol()).unwrap(),
            spectral_gap(&dense, &tol()).unwrap(),
        );
        assert!((gd.m_star - gs.m_star).abs() < 1e-10);
        assert!((gd.growth_bound_a_infinity - gs.growth_bound_a_infinity).abs() < 1e-10);
        let (ad, asd) = (
            analyticity(&diag, &tol()).unwrap(),
            analyticity(&dense, &tol()).unwrap(),
        );
        assert_eq!(ad.verdict, asd.verdict);
        assert!((ad.c_bound - asd.c_bound).abs() < 1e-10);
        assert!(asd.sector_constant_b.abs() < 1e-9);
        for t in [0.3, 2.0] {
            let (x, y) = (
                s_infinity_norm(&diag, t, &tol()).unwrap(),
                s_infinity_norm(&dense, t, &tol()).unwrap(),
            );
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn cross_checks_on_examples() {
        let shear = cross_checks(&build_paper_2x2(), &tol()).unwrap();
        assert_eq!(shear[0].status, CheckStatus::NotApplicable);
        let normal = cross_checks(&dense(&[-1.0, 2.0, -2.0, -1.0], 2), &tol()).unwrap();
        assert!(
            normal.iter().all(|c| c.status == CheckStatus::Pass),
            "{normal:?}"
        );
        let q = SequenceRule::PowerLaw { c: 1.0, p: 2.0 };
        let a = SequenceRule::PiPowerLaw { c: 1.0, p: -2.0 };
        let diag = cross_checks(&build_diagonal(&q, &a, 20).unwrap(), &tol()).unwrap();
        assert!(
            diag.iter().all(|c| c.status == CheckStatus::Pass),
            "{diag:?}"
        );
    }

    #[test]
    fn report_serializes_verdict() {
        let r = analyze(&build_paper_2x2(), &tol()).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["analyticity"]["verdict"], "not-analytic");
        assert_eq!(json["spectral_gap"]["M_star"], "inf");
        let back: DiagnosticsReport = serde_json::from_value(json).unwrap();
        assert!(back.spectral_gap.unwrap().m_star.is_infinite());
        assert!(r.strong_feller_at.values().all(|&v| v));
    }
}
