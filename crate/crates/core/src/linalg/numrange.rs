use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use super::{spectral_norm, to_complex, CMat, CVector, Mat};
use crate::config::Tolerances;

/// Boundary samples of the numerical range `W(M) = { z* M z : |z| = 1 }`.
#[derive(Debug, Clone)]
pub struct NumericalRangeSample {
    pub boundary_points: Vec<Complex64>,
    pub theta_grid: Vec<f64>,
    /// Unit vectors whose Rayleigh quotients are the boundary points.
    pub certificates: Vec<CVector>,
}

fn top_eigvec(h: &CMat) -> (f64, CVector) {
    let eig = SymmetricEigen::new(h.clone());
    let (k, val) =
        eig.eigenvalues
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc },
            );
    (val, eig.eigenvectors.column(k).into_owned())
}

fn hermitian_part(mc: &CMat, theta: f64) -> CMat {
    let rot = Complex64::from_polar(1.0, theta);
    (mc * rot + mc.adjoint() * rot.conj()) * Complex64::new(0.5, 0.0)
}

/// For each grid angle `theta`, the support point of `W(M)` in direction
/// `e^{-i theta}`: the Rayleigh quotient of the top eigenvector of the
/// Hermitian part of `e^{i theta} M`.
pub fn numerical_range(m: &Mat, grid_size: usize) -> NumericalRangeSample {
    let mc = to_complex(m);
    let grid = grid_size.max(1);
    let mut sample = NumericalRangeSample {
        boundary_points: Vec::with_capacity(grid),
        theta_grid: Vec::with_capacity(grid),
        certificates: Vec::with_capacity(grid),
    };
    for k in 0..grid {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / grid as f64;
        let (_, z) = top_eigvec(&hermitian_part(&mc, theta));
        let point = (z.adjoint() * &mc * &z)[(0, 0)];
        sample.theta_grid.push(theta);
        sample.boundary_points.push(point);
        sample.certificates.push(z);
    }
    sample
}

/// `b = sup { |Im z| / (-Re z) : z in W(M) }`, the half-opening of the
/// smallest sector around the negative real axis containing `W(M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorEstimate {
    /// +infinity when no sector exists (or the estimate exceeds the cap).
    pub b: f64,
    /// Uncapped value when `b` was promoted to infinity by the cap.
    pub raw: Option<f64>,
    /// Some point of W(M) has positive real part.
    pub touches_right_half: bool,
    /// The Hermitian part has a kernel that the skew part does not preserve,
    /// so W(M) touches the imaginary axis away from 0.
    pub kernel_obstruction: bool,
    /// Largest normal angle `phi` with `W(M)` inside both half-planes
    /// `cos(phi) Re z +- sin(phi) Im z <= 0`; `b = cot(phi)`.
    pub critical_angle: f64,
}

/// Sector constant of `W(M)` by support-function sampling on the numerical range
/// grid followed by bisection of the critical angle.
pub fn sector_constant(m: &Mat, tol: &Tolerances) -> SectorEstimate {
    let n = m.nrows();
    let scale = spectral_norm(m);
    let infinite = |touches: bool, kernel: bool| SectorEstimate {
        b: f64::INFINITY,
        raw: None,
        touches_right_half: touches,
        kernel_obstruction: kernel,
        critical_angle: 0.0,
    };
    if scale == 0.0 {
        return SectorEstimate {
            b: 0.0,
            raw: None,
            touches_right_half: false,
            kernel_obstruction: false,
            critical_angle: std::f64::consts::FRAC_PI_2,
        };
    }
    let sym = (m + m.transpose()) * 0.5;
    let skew = (m - m.transpose()) * 0.5;
    let s_c = to_complex(&sym);
    // G = -i * skew is Hermitian, and Im(z* M z) = z* G z
    let g_c = to_complex(&skew) * Complex64::new(0.0, -1.0);

    let kernel_thr = tol.rank_cutoff(scale, n, n);
    let feasible_thr = 64.0 * f64::EPSILON * scale * n as f64;

    let sym_eig = SymmetricEigen::new(sym.clone());
    let lmax = sym_eig.eigenvalues.max();
    if lmax > kernel_thr {
        return infinite(true, false);
    }
    let kernel_cols: Vec<usize> = (0..n)
        .filter(|&k| sym_eig.eigenvalues[k].abs() <= kernel_thr)
        .collect();
    if !kernel_cols.is_empty() {
        let mut v0 = Mat::zeros(n, kernel_cols.len());
        for (j, &k) in kernel_cols.iter().enumerate() {
            v0.set_column(j, &sym_eig.eigenvectors.column(k));
        }
        if (&skew * &v0).norm() > kernel_thr {
            return infinite(false, true);
        }
    }

    let support = |phi: f64| -> f64 {
        let h = &s_c * Complex64::new(phi.cos(), 0.0) + &g_c * Complex64::new(phi.sin(), 0.0);
        top_eigvec(&h).0
    };
    let ok = |phi: f64| support(phi) <= feasible_thr && support(-phi) <= feasible_thr;

    let half_pi = std::f64::consts::FRAC_PI_2;
    let steps = (tol.numrange_grid / 4).max(2);
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=steps {
        let phi = half_pi * k as f64 / steps as f64;
        if ok(phi) {
            lo = phi;
        } else {
            hi = Some(phi);
            break;
        }
    }
    let critical = match hi {
        None => half_pi,
        Some(mut hi) => {
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if ok(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        }
    };
    if critical <= 0.0 {
        return infinite(false, false);
    }
    let b = if critical >= half_pi {
        0.0
    } else {
        critical.cos() / critical.sin()
    };
    let (b, raw) = super::cap_infinite(b, tol.infinity_cap);
    SectorEstimate {
        b,
        raw,
        touches_right_half: false,
        kernel_obstruction: false,
        critical_angle: critical,
    }
}
