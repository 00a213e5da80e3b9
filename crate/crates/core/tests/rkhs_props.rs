mod common;

use common::*;
use oulab::rkhs::{build_ht, inclusion, rkhs_norm, RkhsSpace};
use oulab::Tolerances;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reproducing_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=8);
        let k = r.random_range(1..=n);
        let factor = injective(&mut r, n, k);
        let space = RkhsSpace::from_factor(factor, &Tolerances::default()).unwrap();
        let x = random_vector(&mut r, n);
        let g = space.gram();
        let norm = rkhs_norm(&space, &(g * &x)).unwrap();
        let want = x.dot(&(g * &x));
        prop_assert!(rel_err(norm * norm, want) <= 1e-9);
    }

    #[test]
    fn factor_is_a_partial_isometry(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let k = r.random_range(1..=8);
        let factor = gaussian(&mut r, n, k);
        let space = RkhsSpace::from_factor(factor.clone(), &Tolerances::default()).unwrap();
        let u = random_vector(&mut r, k);
        let norm = space.norm(&(&factor * &u)).unwrap();
        prop_assert!(norm <= u.norm() * (1.0 + 1e-9));
        // the least-norm preimage is u projected onto ker(factor)^perp
        let proj = factor.transpose() * (&factor * factor.transpose()).pseudo_inverse(1e-12).unwrap() * &factor * &u;
        prop_assert!(rel_err(norm, proj.norm()) <= 1e-8);
    }

    #[test]
    fn inclusion_reflexive_and_transitive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(1..=6);
        let tol = Tolerances::default();
        let k = r.random_range(1..=n);
        let fa = gaussian(&mut r, n, k);
        let mut fb = fa.clone().insert_column(k, 0.0);
        fb.set_column(k, &random_vector(&mut r, n));
        let mut fc = fb.clone().insert_column(k + 1, 0.0);
        fc.set_column(k + 1, &random_vector(&mut r, n));
        let (a, b, c) = (
            RkhsSpace::from_factor(fa, &tol).unwrap(),
            RkhsSpace::from_factor(fb, &tol).unwrap(),
            RkhsSpace::from_factor(fc, &tol).unwrap(),
        );
        let aa = inclusion(&a, &a, &tol).unwrap();
        prop_assert!(aa.included && (aa.constant_m - 1.0).abs() <= 1e-9);
        let ab = inclusion(&a, &b, &tol).unwrap().constant_m;
        let bc = inclusion(&b, &c, &tol).unwrap().constant_m;
        let ac = inclusion(&a, &c, &tol).unwrap().constant_m;
        prop_assert!(ab.is_finite() && bc.is_finite());
        prop_assert!(ac <= ab * bc + 1e-8);
    }

    #[test]
    fn reachable_spaces_grow_contractively(seed in any::<u64>(), s in 0.05..2.0f64, dt in 0.01..3.0f64) {
        let model = random_stable(seed, 6);
        let tol = Tolerances::default();
        let hs = build_ht(&model, s, &tol).unwrap();
        let ht = build_ht(&model, s + dt, &tol).unwrap();
        let v = inclusion(&hs, &ht, &tol).unwrap();
        prop_assert!(v.included);
        prop_assert!(v.constant_m <= 1.0 + 1e-8);
        prop_assert_eq!(v.included, v.constant_m.is_finite());
    }

    #[test]
    fn membership_dichotomy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.random_range(2..=7);
        let k = r.random_range(1..n);
        let factor = injective(&mut r, n, k);
        let space = RkhsSpace::from_factor(factor.clone(), &Tolerances::default()).unwrap();
        let inside = &factor * random_vector(&mut r, k);
        prop_assert!(rkhs_norm(&space, &inside).unwrap().is_finite());
        let proj = &factor * factor.clone().pseudo_inverse(1e-12).unwrap();
        let w = random_vector(&mut r, n);
        let outside = &w - &proj * &w;
        let h = &inside + &outside * (10.0 * inside.norm() / outside.norm());
        prop_assert_eq!(rkhs_norm(&space, &h).unwrap(), f64::INFINITY);
    }
}
