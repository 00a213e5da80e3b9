//! Seeded random models shared by the integration suites.
#![allow(dead_code)]

use oulab::linalg::{spectral_abscissa, Mat};
use oulab::{OuModel, Tolerances};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    gaussian(rng, n, n).qr().q()
}

pub fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Mat {
    let g = gaussian(rng, n, n);
    &g * g.transpose() / n as f64 + Mat::identity(n, n) * floor
}

pub fn skew(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = gaussian(rng, n, n);
    (&g - g.transpose()) * 0.5
}

/// Gaussian matrix shifted so its spectral abscissa is `-margin`.
pub fn stable_drift(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Mat {
    let g = gaussian(rng, n, n) / (n as f64).sqrt();
    let shift = spectral_abscissa(&g).unwrap() + margin;
    g - Mat::identity(n, n) * shift
}

/// Noise factor with full column rank `m`.
pub fn injective(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Mat {
    loop {
        let i = gaussian(rng, n, m);
        let sv = i.singular_values();
        if sv.min() > 0.1 * sv.max() {
            return i;
        }
    }
}

pub fn model(name: &str, a: Mat, i: Mat) -> OuModel {
    OuModel::new(name, a, i, &Tolerances::default()).unwrap()
}

/// Stable drift of size 1..=max_n with noise rank 1..=n.
pub fn random_stable(seed: u64, max_n: usize) -> OuModel {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let m = r.random_range(1..=n);
    let margin = r.random_range(0.2..1.0);
    let a = stable_drift(&mut r, n, margin);
    let i = injective(&mut r, n, m);
    model(&format!("random-{seed}"), a, i)
}

/// Stable drift with square invertible noise, so Q is positive definite.
pub fn random_full_noise(seed: u64, max_n: usize) -> OuModel {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let margin = r.random_range(0.2..1.0);
    let a = stable_drift(&mut r, n, margin);
    let i = injective(&mut r, n, n);
    model(&format!("full-{seed}"), a, i)
}

/// `A = -Q M` with M positive definite, hence `AQ = QA^T`.
pub fn random_q_symmetric(seed: u64, max_n: usize) -> OuModel {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let i = injective(&mut r, n, n);
    let q = &i * i.transpose();
    let m = spd(&mut r, n, 0.2);
    model(&format!("qsym-{seed}"), -(&q * m), i)
}

/// Model whose drift is not Q-symmetric: a Q-symmetric drift plus a
/// Q-skew perturbation `K Q^{-1}` with K skew.
pub fn random_q_asymmetric(seed: u64, max_n: usize) -> OuModel {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_n.max(2));
    let i = injective(&mut r, n, n);
    let q = &i * i.transpose();
    let m = spd(&mut r, n, 0.2);
    let k = skew(&mut r, n) * 2.0;
    let q_inv = q.clone().try_inverse().unwrap();
    model(&format!("qasym-{seed}"), -(&q * m) + k * q_inv, i)
}

/// H-invariant model with prescribed restricted drift `a_h` in orthonormal
/// H-coordinates. Returns the model and `a_h`.
pub fn invariant_with(r: &mut ChaCha8Rng, n: usize, a_h: &Mat) -> OuModel {
    invariant_with_complement(r, n, a_h, 0.5)
}

/// As [`invariant_with`]; the drift on the complement of H has spectral
/// abscissa `-complement_margin`, so a negative margin makes A unstable
/// in directions the noise never reaches.
pub fn invariant_with_complement(
    r: &mut ChaCha8Rng,
    n: usize,
    a_h: &Mat,
    complement_margin: f64,
) -> OuModel {
    let m = a_h.nrows();
    let o = orthogonal(r, n);
    let basis = o.columns(0, m).into_owned();
    let coords = injective(r, m, m);
    let i = &basis * &coords;
    // A i = i a_h on range(i); arbitrary stable action on the complement.
    let mut block = Mat::zeros(n, n);
    block
        .view_mut((0, 0), (m, m))
        .copy_from(&(&coords * a_h * coords.clone().try_inverse().unwrap()));
    if n > m {
        let k = n - m;
        block.view_mut((0, m), (m, k)).copy_from(&gaussian(r, m, k));
        block
            .view_mut((m, m), (k, k))
            .copy_from(&stable_drift(r, k, complement_margin));
    }
    let a = &o * block * o.transpose();
    model("invariant", a, i)
}

/// Random H-invariant model; `contractive` selects `sym(a_h) <= 0` or a
/// restricted drift whose symmetric part has a positive eigenvalue >= 0.05.
pub fn random_invariant(seed: u64, max_n: usize, contractive: bool) -> (OuModel, Mat) {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let m = r.random_range(1..=n);
    let a_h = if contractive {
        -spd(&mut r, m, 0.1) + skew(&mut r, m) * 2.0
    } else {
        loop {
            let cand = if m == 1 {
                Mat::from_element(1, 1, r.random_range(0.05..1.0))
            } else {
                stable_drift(&mut r, m, 0.3) + skew(&mut r, m) + gaussian(&mut r, m, m) * 0.5
            };
            let sym = (&cand + cand.transpose()) * 0.5;
            if sym.symmetric_eigenvalues().max() >= 0.05 {
                break cand;
            }
        }
    };
    (invariant_with(&mut r, n, &a_h), a_h)
}

/// Normal drift `O D O^T` with D block diagonal (scalars and damped
/// rotations), noise `c O`.
pub fn random_normal(seed: u64, max_n: usize) -> OuModel {
    let mut r = rng(seed);
    let n = r.random_range(2..=max_n.max(2));
    let mut d = Mat::zeros(n, n);
    let mut k = 0;
    while k < n {
        let decay = r.random_range(0.2..2.0);
        if k + 1 < n && r.random_bool(0.5) {
            let w = r.random_range(-3.0..3.0);
            d[(k, k)] = -decay;
            d[(k + 1, k + 1)] = -decay;
            d[(k, k + 1)] = w;
            d[(k + 1, k)] = -w;
            k += 2;
        } else {
            d[(k, k)] = -decay;
            k += 1;
        }
    }
    let o = orthogonal(&mut r, n);
    let c = r.random_range(0.5..2.0);
    model(&format!("normal-{seed}"), &o * d * o.transpose(), o * c)
}

pub fn random_diagonal(seed: u64, max_n: usize) -> OuModel {
    let mut r = rng(seed);
    let n = r.random_range(1..=max_n);
    let q = (0..n).map(|_| r.random_range(0.1..3.0)).collect();
    let a = (0..n).map(|_| r.random_range(0.2..3.0)).collect();
    OuModel::diagonal(format!("diag-{seed}"), q, a).unwrap()
}

pub fn random_vector(r: &mut ChaCha8Rng, n: usize) -> oulab::linalg::Vector {
    oulab::linalg::Vector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal))
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}
