mod common;

use common::*;
use oulab::covariance::gramian_quadrature;
use oulab::linalg::{checked_singular_values, expm, numerical_rank, spectral_norm, Mat};
use oulab::restriction::{
    check_invariance, contraction_criterion, kalman_rank, normal_energy_identity,
    regularization_estimate, RestrictedSemigroup, DEFAULT_INVARIANCE_TIMES,
};
use oulab::{build_paper_2x2, Tolerances};
use proptest::prelude::*;
use rand::Rng;

/// `[i, Ai, ..., A^{n-1} i]` with A scaled to unit norm.
fn controllability(model: &oulab::OuModel) -> Mat {
    let (n, m) = (model.dim(), model.noise_dim());
    let a = model.drift() / spectral_norm(model.drift()).max(f64::MIN_POSITIVE);
    let mut k = Mat::zeros(n, n * m);
    let mut block = model.noise().clone();
    for j in 0..n {
        k.columns_mut(j * m, m).copy_from(&block);
        block = &a * block;
    }
    k
}

/// No singular value within a factor 100 of the rank cutoff, nor below
/// 100 times the relative accuracy `accuracy` of the matrix entries
/// unless it is below the cutoff as well.
fn rank_resolved(m: &Mat, tol: &Tolerances, accuracy: f64) -> bool {
    let sv = checked_singular_values(m);
    let top = sv.max();
    let cutoff = tol.rank_cutoff(top, m.nrows(), m.ncols());
    let upper = 100.0 * cutoff.max(accuracy * top);
    sv.iter().all(|&s| s < cutoff / 100.0 || s > upper)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariant_models_intertwine(seed in any::<u64>(), contractive in any::<bool>()) {
        let (model, a_h) = random_invariant(seed, 6, contractive);
        let tol = Tolerances::default();
        let report = check_invariance(&model, &DEFAULT_INVARIANCE_TIMES, &tol).unwrap();
        prop_assert!(report.invariant && report.generator_condition);
        let sh = RestrictedSemigroup::new(&model, &tol).unwrap();
        prop_assert!((&sh.a_h - &a_h).norm() <= 1e-8 * (1.0 + a_h.norm()));
        let i = model.noise();
        for t in DEFAULT_INVARIANCE_TIMES {
            let left = expm(model.drift(), t, &tol).unwrap() * i;
            let right = i * sh.at(t, &tol).unwrap();
            prop_assert!((left - right).norm() <= 1e-8 * i.norm());
        }
        let growth = a_h.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((sh.growth_bound - growth).abs() <= 1e-8 * (1.0 + growth.abs()));
    }

    #[test]
    fn contraction_iff_h_norm_bounded(seed in any::<u64>(), contractive in any::<bool>()) {
        let (model, _) = random_invariant(seed, 6, contractive);
        let tol = Tolerances::default();
        let verdict = contraction_criterion(&model, &tol);
        let sh = RestrictedSemigroup::new(&model, &tol).unwrap();
        let bounded = [0.001, 0.01, 0.1, 1.0, 3.0]
            .iter()
            .all(|&t| sh.h_norm(t, &tol).unwrap() <= 1.0 + 1e-8);
        prop_assert_eq!(verdict.contractive, contractive);
        prop_assert_eq!(bounded, contractive);
    }

    #[test]
    fn regularization_bound_holds(seed in any::<u64>(), t in 0.1..3.0f64) {
        let (model, _) = random_invariant(seed, 5, seed % 3 != 0);
        let tol = Tolerances::default();
        let mut r = rng(seed ^ 0x5eed);
        let u = random_vector(&mut r, model.noise_dim());
        let h = model.noise() * u;
        let est = regularization_estimate(&model, t, &h, &tol).unwrap();
        prop_assert!(est.holds, "|S(t)h|_Ht^2 = {} > bound {}", est.ht_norm.powi(2), est.bound);
    }

    #[test]
    fn kalman_rank_is_gramian_rank(seed in any::<u64>(), t in 0.05..4.0f64) {
        let mut r = rng(seed);
        let tol = Tolerances::default();
        let model = if r.random_bool(0.5) {
            random_stable(seed, 5)
        } else {
            let (m, _) = random_invariant(seed, 5, true);
            m
        };
        let q_t = gramian_quadrature(&model, t, &tol).unwrap().value;
        // a rank is only decidable when no singular value sits near the cutoff
        prop_assume!(rank_resolved(&q_t, &tol, tol.quad) && rank_resolved(&controllability(&model), &tol, 0.0));
        prop_assert_eq!(kalman_rank(&model, &tol), numerical_rank(&q_t, &tol));
    }

    // Q_t loses numerical rank like t^{2(n-1)} as t -> 0, never gains it.
    #[test]
    fn gramian_rank_never_exceeds_kalman_rank(seed in any::<u64>(), t in 1e-3..0.5f64) {
        let tol = Tolerances::default();
        let model = random_stable(seed, 8);
        let q_t = gramian_quadrature(&model, t, &tol).unwrap().value;
        prop_assert!(numerical_rank(&q_t, &tol) <= kalman_rank(&model, &tol));
    }

    #[test]
    fn normal_energy_converges(seed in any::<u64>(), t in 0.2..2.5f64) {
        let model = if seed % 2 == 0 { random_diagonal(seed, 8) } else { random_normal(seed, 6) };
        let mut r = rng(seed);
        let h = random_vector(&mut r, model.dim());
        let coarse = Tolerances { quad: 1e-6, ..Tolerances::default() };
        let fine = Tolerances { quad: 1e-12, quad_max_doublings: 16, ..Tolerances::default() };
        let a = normal_energy_identity(&model, t, &h, &coarse).unwrap();
        let b = normal_energy_identity(&model, t, &h, &fine).unwrap();
        let (ea, eb) = (rel_err(a.lhs, a.rhs), rel_err(b.lhs, b.rhs));
        prop_assert!(eb <= 1e-5);
        prop_assert!(eb <= ea.max(1e-10));
    }
}

#[test]
fn shear_model_is_not_invariant() {
    let tol = Tolerances::default();
    let model = build_paper_2x2();
    assert!(
        !check_invariance(&model, &DEFAULT_INVARIANCE_TIMES, &tol)
            .unwrap()
            .invariant
    );
    assert!(RestrictedSemigroup::new(&model, &tol).is_err());
    assert_eq!(kalman_rank(&model, &tol), 2);
}

#[test]
fn non_normal_restriction_is_rejected() {
    let a = Mat::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -1.0]);
    let model = model("jordan", a, Mat::identity(2, 2));
    let h = oulab::linalg::Vector::from_vec(vec![1.0, 0.0]);
    assert!(normal_energy_identity(&model, 1.0, &h, &Tolerances::default()).is_err());
}
