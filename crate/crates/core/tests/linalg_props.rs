mod common;

use common::*;
use oulab::linalg::{expm, numerical_range, pencil_sup_ratio, pseudo_apply, Mat, Vector};
use oulab::Tolerances;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn expm_semigroup_law(seed in any::<u64>(), s in 0.0..3.0f64, t in 0.0..3.0f64) {
        let mut r = rng(seed);
        let n = r.random_range(1..=50);
        let a = stable_drift(&mut r, n, 0.3);
        let tol = Tolerances::default();
        let lhs = expm(&a, s, &tol).unwrap() * expm(&a, t, &tol).unwrap();
        let rhs = expm(&a, s + t, &tol).unwrap();
        prop_assert!((&lhs - &rhs).norm() <= 1e-8 * rhs.norm().max(1.0));
    }

    #[test]
    fn finite_pencil_bounds_every_direction(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let q = spd(&mut r, n, 0.0);
        let rr = spd(&mut r, n, 0.05);
        let tol = Tolerances::default();
        let res = pencil_sup_ratio(&q, &rr, &tol).unwrap();
        prop_assert!(res.is_finite());
        let m = res.sup_ratio;
        for _ in 0..1000 {
            let x = random_vector(&mut r, n).normalize();
            prop_assert!(x.dot(&(&q * &x)) <= (m + 1e-8) * x.dot(&(&rr * &x)));
        }
        let arg = res.argmax_vector.unwrap();
        prop_assert!(rel_err(arg.dot(&(&q * &arg)) / arg.dot(&(&rr * &arg)), m) <= 1e-8);
    }

    #[test]
    fn pencil_of_psd_with_itself_is_one(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let k = r.random_range(1..=n);
        let f = gaussian(&mut r, n, k);
        let q = &f * f.transpose();
        let res = pencil_sup_ratio(&q, &q, &Tolerances::default()).unwrap();
        prop_assert!((res.sup_ratio - 1.0).abs() <= 1e-9);
        prop_assert!(!res.kernel_violation);
    }

    #[test]
    fn infinite_pencil_iff_kernel_violation(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=6);
        let q = spd(&mut r, n, 0.1);
        let f = gaussian(&mut r, n, n - 1);
        let singular = &f * f.transpose();
        let res = pencil_sup_ratio(&q, &singular, &Tolerances::default()).unwrap();
        prop_assert!(res.kernel_violation);
        prop_assert_eq!(res.sup_ratio, f64::INFINITY);
    }

    #[test]
    fn pseudo_apply_recovers_range_vectors(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let m = r.random_range(1..=8);
        let b = gaussian(&mut r, n, m);
        let u = random_vector(&mut r, m);
        let y = &b * u;
        let sol = pseudo_apply(&b, &y, &Tolerances::default()).unwrap();
        prop_assert!(sol.in_range);
        prop_assert!((&b * sol.solution - &y).norm() <= 1e-10 * y.norm().max(1e-300));
    }

    #[test]
    fn numerical_range_points_are_rayleigh_quotients(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let m = gaussian(&mut r, n, n);
        let sample = numerical_range(&m, 64);
        let mc = m.map(|v| num_complex::Complex64::new(v, 0.0));
        for (z, p) in sample.certificates.iter().zip(&sample.boundary_points) {
            prop_assert!((z.norm() - 1.0).abs() <= 1e-10);
            let q = (z.adjoint() * &mc * z)[(0, 0)];
            prop_assert!((q - p).norm() <= 1e-10 * (1.0 + m.norm()));
        }
    }
}

#[test]
fn expm_of_zero_time_is_identity() {
    let a = Mat::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]);
    let e = expm(&a, 0.0, &Tolerances::default()).unwrap();
    assert_eq!(e, Mat::identity(2, 2));
    let x = Vector::from_vec(vec![1.0, 2.0]);
    assert_eq!(&e * &x, x);
}
