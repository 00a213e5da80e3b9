//! The OU process itself: exact Gaussian transitions, Monte Carlo and
//! closed-form evaluation of `P(t) f` on cylindrical functions, the generator
//! on the same class, and the integration-by-parts identity under `mu_inf`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::covariance::{gramian_diagonal_closed_form, gramian_quadrature, invariant_covariance};
use crate::error::{OuError, Result};
use crate::linalg::{ensure_finite, scale_columns, sym_eigen_desc, symmetrize, Mat, Vector};
use crate::model::OuModel;
use crate::poly::Poly;

/// Highest polynomial degree of an outer function.
pub const MAX_OUTER_DEGREE: u32 = 4;

/// Eigenvalues of a sampling covariance below `-FACTOR_NEGATIVE_REL * lambda_max` are rejected.
pub const FACTOR_NEGATIVE_REL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Outer {
    /// A polynomial in the d projections.
    Polynomial(Poly),
    /// `z -> exp(i z)` of the single projection.
    Exponential,
}

/// `f(x) = phi(<x, x*_1>, ..., <x, x*_d>)`; the columns of `directions` are the x*_j.
#[derive(Debug, Clone, PartialEq)]
pub struct CylindricalFunction {
    directions: Mat,
    outer: Outer,
}

impl CylindricalFunction {
    pub fn polynomial(directions: Mat, outer: Poly) -> Result<Self> {
        let d = directions.ncols();
        if d == 0 || directions.nrows() == 0 {
            return Err(OuError::InvalidInput(
                "cylindrical function needs at least one direction".into(),
            ));
        }
        ensure_finite(&directions, "directions")?;
        if outer.nvars() != d {
            return Err(OuError::dims(
                format!("outer polynomial in {d} variables"),
                outer.nvars().to_string(),
            ));
        }
        if outer.degree() > MAX_OUTER_DEGREE {
            return Err(OuError::Unsupported(format!(
                "outer polynomial degree {} exceeds {MAX_OUTER_DEGREE}",
                outer.degree()
            )));
        }
        if outer.terms().any(|(_, c)| !c.is_finite()) {
            return Err(OuError::InvalidInput(
                "outer polynomial has non-finite coefficients".into(),
            ));
        }
        Ok(Self {
            directions,
            outer: Outer::Polynomial(outer),
        })
    }

    /// `exp(i <x, x*>)`
    pub fn exponential(direction: Vector) -> Result<Self> {
        if direction.is_empty() || direction.iter().any(|v| !v.is_finite()) {
            return Err(OuError::InvalidInput(
                "exponential direction must be finite and nonempty".into(),
            ));
        }
        Ok(Self {
            directions: Mat::from_column_slice(direction.len(), 1, direction.as_slice()),
            outer: Outer::Exponential,
        })
    }

    /// `<x, x*>`
    pub fn linear(direction: Vector) -> Result<Self> {
        Self::polynomial(
            Mat::from_column_slice(direction.len(), 1, direction.as_slice()),
            Poly::var(1, 0),
        )
    }

    /// `<x, x*>^2`
    pub fn square(direction: Vector) -> Result<Self> {
        Self::polynomial(
            Mat::from_column_slice(direction.len(), 1, direction.as_slice()),
            Poly::var(1, 0).pow(2),
        )
    }

    pub fn constant(n: usize, c: f64) -> Result<Self> {
        Self::polynomial(Mat::zeros(n, 1), Poly::constant(1, c))
    }

    pub fn directions(&self) -> &Mat {
        &self.directions
    }

    pub fn outer(&self) -> &Outer {
        &self.outer
    }

    pub fn state_dim(&self) -> usize {
        self.directions.nrows()
    }

    pub fn eval(&self, x: &Vector) -> Complex64 {
        let z = self.directions.tr_mul(x);
        match &self.outer {
            Outer::Polynomial(p) => Complex64::new(p.eval(z.as_slice()), 0.0),
            Outer::Exponential => Complex64::new(0.0, z[0]).exp(),
        }
    }

    /// `phi(D^T x)` as a polynomial in the n state variables.
    pub fn state_polynomial(&self) -> Option<Poly> {
        match &self.outer {
            Outer::Polynomial(p) => Some(
                p.compose_affine(&self.directions.transpose(), None)
                    .expect("shapes match"),
            ),
            Outer::Exponential => None,
        }
    }

    fn check_dim(&self, model: &OuModel) -> Result<()> {
        if self.state_dim() != model.dim() {
            return Err(OuError::dims(
                format!("directions in dimension {}", model.dim()),
                self.state_dim().to_string(),
            ));
        }
        Ok(())
    }
}

/// Law of `X(t, x)`: `N(S(t) x, Q_t)`.
#[derive(Debug, Clone)]
pub struct TransitionLaw {
    pub semigroup: Mat,
    pub covariance: Mat,
}

pub fn transition_law(model: &OuModel, t: f64, tol: &Tolerances) -> Result<TransitionLaw> {
    if !(t.is_finite() && t > 0.0) {
        return Err(OuError::InvalidInput(format!(
            "time must be finite and > 0, got {t}"
        )));
    }
    model.ensure_dense()?;
    let covariance = match model.diagonal_data() {
        Some(d) => Mat::from_diagonal(&Vector::from_vec(gramian_diagonal_closed_form(
            &d.q, &d.a, t,
        ))),
        None => gramian_quadrature(model, t, tol)?.value,
    };
    Ok(TransitionLaw {
        semigroup: model.semigroup(t, tol)?,
        covariance,
    })
}

/// Symmetric square root of a covariance used for sampling.
pub fn sampling_factor(cov: &Mat) -> Result<Mat> {
    let (values, vectors) = sym_eigen_desc(&symmetrize(cov));
    let top = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -FACTOR_NEGATIVE_REL * top {
        return Err(OuError::IndefiniteCovariance {
            min_eigenvalue: min,
        });
    }
    let roots = values.map(|v| v.max(0.0).sqrt());
    Ok(scale_columns(&vectors, &roots) * vectors.transpose())
}

/// Draws `mean + L z` with one ChaCha stream per sample index.
#[derive(Debug, Clone)]
struct GaussianSampler {
    mean: Vector,
    factor: Mat,
    seed: u64,
}

impl GaussianSampler {
    fn draw(&self, index: u64) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let z = Vector::from_iterator(
            self.factor.ncols(),
            (0..self.factor.ncols()).map(|_| StandardNormal.sample(&mut rng)),
        );
        &self.mean + &self.factor * z
    }
}

fn sampler(
    model: &OuModel,
    x: &Vector,
    t: f64,
    seed: u64,
    tol: &Tolerances,
) -> Result<GaussianSampler> {
    if x.len() != model.dim() {
        return Err(OuError::dims(
            format!("state of length {}", model.dim()),
            x.len().to_string(),
        ));
    }
    let law = transition_law(model, t, tol)?;
    Ok(GaussianSampler {
        mean: &law.semigroup * x,
        factor: sampling_factor(&law.covariance)?,
        seed,
    })
}

/// `count` independent draws of `X(t, x)`, reproducible from `seed`.
pub fn sample_transition(
    model: &OuModel,
    x: &Vector,
    t: f64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<Vector>> {
    let s = sampler(model, x, t, seed, tol)?;
    Ok((0..count as u64)
        .into_par_iter()
        .map(|k| s.draw(k))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum TransitionMode {
    Exact,
    MonteCarlo { count: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionValue {
    pub value: Complex64,
    /// Standard error of the Monte Carlo mean.
    pub std_error: Option<f64>,
}

/// `P(t) f (x) = E f(X(t, x))`
pub fn transition_apply(
    model: &OuModel,
    f: &CylindricalFunction,
    x: &Vector,
    t: f64,
    mode: TransitionMode,
    tol: &Tolerances,
) -> Result<TransitionValue> {
    f.check_dim(model)?;
    match mode {
        TransitionMode::Exact => {
            let law = transition_law(model, t, tol)?;
            Ok(TransitionValue {
                value: gaussian_expectation(f, &(&law.semigroup * x), &law.covariance)?,
                std_error: None,
            })
        }
        TransitionMode::MonteCarlo { count, seed } => {
            if count == 0 {
                return Err(OuError::InvalidInput("Monte Carlo needs count >= 1".into()));
            }
            let s = sampler(model, x, t, seed, tol)?;
            let values: Vec<Complex64> = (0..count as u64)
                .into_par_iter()
                .map(|k| f.eval(&s.draw(k)))
                .collect();
            let n = count as f64;
            let mean = values.iter().sum::<Complex64>() / n;
            let var = if count > 1 {
                values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Ok(TransitionValue {
                value: mean,
                std_error: Some((var / n).sqrt()),
            })
        }
    }
}

/// `E f(Y)` for `Y ~ N(mean, cov)` in closed form.
pub fn gaussian_expectation(
    f: &CylindricalFunction,
    mean: &Vector,
    cov: &Mat,
) -> Result<Complex64> {
    let d = &f.directions;
    let m = d.tr_mul(mean);
    let c = symmetrize(&(d.transpose() * cov * d));
    Ok(match &f.outer {
        Outer::Polynomial(p) => Complex64::new(p.gaussian_expectation(&m, &c)?, 0.0),
        Outer::Exponential => Complex64::new(-0.5 * c[(0, 0)], m[0]).exp(),
    })
}

/// `x -> P(t) f (x)` as a polynomial in the state variables.
pub fn transition_polynomial(
    model: &OuModel,
    f: &CylindricalFunction,
    t: f64,
    tol: &Tolerances,
) -> Result<Poly> {
    f.check_dim(model)?;
    let Outer::Polynomial(p) = &f.outer else {
        return Err(OuError::Unsupported(
            "transition polynomial needs a polynomial outer function".into(),
        ));
    };
    let law = transition_law(model, t, tol)?;
    let d = &f.directions;
    let dim = d.ncols();
    let n = model.dim();
    // phi(D^T S x + w), w ~ N(0, D^T Q_t D)
    let mut subst = Mat::zeros(dim, n + dim);
    subst
        .view_mut((0, 0), (dim, n))
        .copy_from(&(d.transpose() * &law.semigroup));
    subst.view_mut((0, n), (dim, dim)).fill_with_identity();
    let joint = p.compose_affine(&subst, None)?;
    joint.expect_trailing(&symmetrize(&(d.transpose() * &law.covariance * d)))
}

/// `L f (x) = 1/2 sum phi_jk <Q x*_j, x*_k> + sum phi_j <x, A^T x*_j>`
pub fn generator_apply(model: &OuModel, f: &CylindricalFunction, x: &Vector) -> Result<Complex64> {
    f.check_dim(model)?;
    model.ensure_dense()?;
    let d = &f.directions;
    let z = d.tr_mul(x);
    let gram = d.transpose() * model.covariance() * d;
    let drift = d.transpose() * (model.drift() * x);
    Ok(match &f.outer {
        Outer::Polynomial(p) => {
            let dim = d.ncols();
            let mut acc = 0.0;
            for j in 0..dim {
                let pj = p.derivative(j);
                acc += pj.eval(z.as_slice()) * drift[j];
                for k in 0..dim {
                    acc += 0.5 * pj.derivative(k).eval(z.as_slice()) * gram[(j, k)];
                }
            }
            Complex64::new(acc, 0.0)
        }
        Outer::Exponential => {
            Complex64::new(0.0, z[0]).exp() * Complex64::new(-0.5 * gram[(0, 0)], drift[0])
        }
    })
}

/// `L p` for a polynomial in the state variables.
pub fn generator_polynomial(model: &OuModel, p: &Poly) -> Result<Poly> {
    model.ensure_dense()?;
    let n = model.dim();
    if p.nvars() != n {
        return Err(OuError::dims(
            format!("polynomial in {n} variables"),
            p.nvars().to_string(),
        ));
    }
    let q = model.covariance();
    let a = model.drift();
    let grads: Vec<Poly> = (0..n).map(|k| p.derivative(k)).collect();
    let mut out = Poly::zero(n);
    for (row, grad) in grads.iter().enumerate() {
        if grad.is_zero() {
            continue;
        }
        let ax = Poly::linear(&a.row(row).iter().copied().collect::<Vec<_>>());
        out = out.add(&grad.mul(&ax));
        for col in 0..n {
            if q[(row, col)] != 0.0 {
                out = out.add(&grad.derivative(col).scale(0.5 * q[(row, col)]));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbpCheck {
    /// `E[f L g + g L f]` under `mu_inf`.
    pub lhs: f64,
    /// `-E <Q grad f, grad g>` under `mu_inf`.
    pub rhs: f64,
    pub passes: bool,
}

pub const IBP_MAX_DEGREE: u32 = 2;
pub const IBP_REL_TOL: f64 = 1e-8;

pub fn ibp_check(
    model: &OuModel,
    f: &CylindricalFunction,
    g: &CylindricalFunction,
    tol: &Tolerances,
) -> Result<IbpCheck> {
    f.check_dim(model)?;
    g.check_dim(model)?;
    let (Some(pf), Some(pg)) = (f.state_polynomial(), g.state_polynomial()) else {
        return Err(OuError::Unsupported(
            "integration by parts needs polynomial outer functions".into(),
        ));
    };
    if pf.degree() > IBP_MAX_DEGREE || pg.degree() > IBP_MAX_DEGREE {
        return Err(OuError::Unsupported(format!(
            "integration by parts is closed-form only up to degree {IBP_MAX_DEGREE}"
        )));
    }
    let q_inf = invariant_covariance(model, tol)?.matrix;
    let n = model.dim();
    let zero = Vector::zeros(n);
    let integrand = pf
        .mul(&generator_polynomial(model, &pg)?)
        .add(&pg.mul(&generator_polynomial(model, &pf)?));
    let lhs = integrand.gaussian_expectation(&zero, &q_inf)?;
    let q = model.covariance();
    let mut energy = Poly::zero(n);
    let gf: Vec<Poly> = (0..n).map(|k| pf.derivative(k)).collect();
    let gg: Vec<Poly> = (0..n).map(|k| pg.derivative(k)).collect();
    for a in 0..n {
        if gf[a].is_zero() {
            continue;
        }
        for b in 0..n {
            if q[(a, b)] != 0.0 && !gg[b].is_zero() {
                energy = energy.add(&gf[a].mul(&gg[b]).scale(q[(a, b)]));
            }
        }
    }
    let rhs = -energy.gaussian_expectation(&zero, &q_inf)?;
    Ok(IbpCheck {
        lhs,
        rhs,
        passes: (lhs - rhs).abs() <= IBP_REL_TOL * (1.0 + lhs.abs()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConsistency {
    pub steps: Vec<f64>,
    /// `|(P(h) f (x) - f(x)) / h - L f (x)|` per step.
    pub errors: Vec<f64>,
    pub generator_value: Complex64,
    /// Observed order of the error after Richardson removal of its `h^2`
    /// term, from the two finest usable steps; +infinity when fewer than
    /// two are usable.
    pub order: f64,
}

pub const DEFAULT_STEPS: [f64; 6] = [0.02, 0.01, 0.005, 0.0025, 0.00125, 0.000625];

/// Local orders closer than this count as settled.
const ORDER_SETTLE: f64 = 1e-3;
const MAX_EXTRA_HALVINGS: usize = 30;
/// Corrected errors must exceed their rounding bound by this factor.
const NOISE_MARGIN: f64 = 64.0;

struct Probe {
    h: f64,
    error: Complex64,
    noise: f64,
}

/// The signed error `e(h) = c1 h + c2 h^2 + ...` combined over a step pair
/// `(h, h / r)` as `(r^2 e(h / r) - e(h)) / (r - 1) = c1 h + O(h^3)`.
fn corrected(coarse: &Probe, fine: &Probe) -> Option<(f64, f64)> {
    let r = coarse.h / fine.h;
    if r <= 1.0 {
        return None;
    }
    let value = ((fine.error * (r * r) - coarse.error) / (r - 1.0)).norm();
    let noise = (r * r * fine.noise + coarse.noise) / (r - 1.0);
    (value > NOISE_MARGIN * noise).then(|| (coarse.h.ln(), value.ln()))
}

/// Difference-quotient errors along `steps`, then along further halvings of
/// the last step until the local order settles or rounding takes over.
/// `steps` and `errors` cover both parts.
pub fn generator_consistency(
    model: &OuModel,
    f: &CylindricalFunction,
    x: &Vector,
    steps: &[f64],
    tol: &Tolerances,
) -> Result<GeneratorConsistency> {
    let lf = generator_apply(model, f, x)?;
    let fx = f.eval(x);
    let probe = |h: f64| -> Result<Probe> {
        let p = transition_apply(model, f, x, h, TransitionMode::Exact, tol)?.value;
        Ok(Probe {
            h,
            error: (p - fx) / h - lf,
            noise: 8.0 * f64::EPSILON * (1.0 + fx.norm() + p.norm()) / h,
        })
    };
    let mut probes = steps
        .iter()
        .map(|&h| probe(h))
        .collect::<Result<Vec<_>>>()?;
    let slope = |a: (f64, f64), b: (f64, f64)| (a.1 - b.1) / (a.0 - b.0);
    let points = |probes: &[Probe]| -> Vec<(f64, f64)> {
        probes
            .windows(2)
            .filter_map(|w| corrected(&w[0], &w[1]))
            .collect()
    };
    for _ in 0..MAX_EXTRA_HALVINGS {
        let pts = points(&probes);
        let usable_tail = probes.len() >= 2
            && corrected(&probes[probes.len() - 2], &probes[probes.len() - 1]).is_some();
        let settled = match pts.as_slice() {
            [.., p0, p1, p2] => (slope(*p0, *p1) - slope(*p1, *p2)).abs() <= ORDER_SETTLE,
            _ => false,
        };
        if settled || !usable_tail || pts.len() < 2 {
            break;
        }
        let h = probes.last().map_or(1.0, |p| p.h) / 2.0;
        probes.push(probe(h)?);
    }
    let order = match points(&probes).as_slice() {
        [.., p1, p2] => slope(*p1, *p2),
        _ => f64::INFINITY,
    };
    Ok(GeneratorConsistency {
        steps: probes.iter().map(|p| p.h).collect(),
        errors: probes.iter().map(|p| p.error.norm()).collect(),
        generator_value: lf,
        order,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    /// One row per time.
    pub states: Mat,
    pub seed: u64,
}

/// A path on `times` started from `x0` at time 0, built from exact
/// transitions between consecutive grid points.
pub fn simulate_path(
    model: &OuModel,
    x0: &Vector,
    times: &[f64],
    seed: u64,
    tol: &Tolerances,
) -> Result<SamplePath> {
    let n = model.dim();
    if x0.len() != n {
        return Err(OuError::dims(
            format!("state of length {n}"),
            x0.len().to_string(),
        ));
    }
    if times.is_empty()
        || times[0] < 0.0
        || times.windows(2).any(|w| w[1] <= w[0])
        || times.iter().any(|t| !t.is_finite())
    {
        return Err(OuError::InvalidInput(
            "time grid must be finite, nonnegative and strictly increasing".into(),
        ));
    }
    let mut states = Mat::zeros(times.len(), n);
    let mut current = x0.clone();
    let mut previous = 0.0;
    let mut cached: Option<(f64, TransitionLaw, Mat)> = None;
    for (k, &t) in times.iter().enumerate() {
        let dt = t - previous;
        if dt > 0.0 {
            let reuse = cached
                .as_ref()
                .is_some_and(|(h, _, _)| (h - dt).abs() <= 1e-12 * dt);
            if !reuse {
                let law = transition_law(model, dt, tol)?;
                let factor = sampling_factor(&law.covariance)?;
                cached = Some((dt, law, factor));
            }
            let (_, law, factor) = cached.as_ref().expect("set above");
            let s = GaussianSampler {
                mean: &law.semigroup * &current,
                factor: factor.clone(),
                seed,
            };
            current = s.draw(k as u64);
        }
        states.row_mut(k).copy_from(&current.transpose());
        previous = t;
    }
    Ok(SamplePath {
        times: times.to_vec(),
        states,
        seed,
    })
}
