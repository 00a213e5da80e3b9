mod common;

use common::*;
use oulab::chaos::{gamma_operator, transition_chaos, whiten, ChaosBasis};
use oulab::covariance::check_q_symmetry;
use oulab::diagnostics::s_infinity_norm;
use oulab::engine::{transition_apply, CylindricalFunction, TransitionMode};
use oulab::linalg::{spectral_norm, Mat, Vector};
use oulab::poly::Poly;
use oulab::{OuModel, Tolerances};
use proptest::prelude::*;
use rand::Rng;

fn contraction(r: &mut rand_chacha::ChaCha8Rng, m: usize) -> Mat {
    let g = gaussian(r, m, m);
    let norm = spectral_norm(&g);
    g * (r.random_range(0.2..1.0) / norm)
}

fn hermite_poly(k: u32, var: usize, nvars: usize) -> Poly {
    let x = Poly::var(nvars, var);
    let (mut prev, mut cur) = (Poly::zero(nvars), Poly::constant(nvars, 1.0));
    for j in 0..k {
        let next = x.mul(&cur).add(&prev.scale(-(j as f64)));
        prev = cur;
        cur = next;
    }
    cur
}

fn basis_poly(alpha: &[u32]) -> Poly {
    let m = alpha.len();
    alpha.iter().enumerate().fold(
        Poly::constant(m, ChaosBasis::normalization(alpha)),
        |acc, (k, &e)| acc.mul(&hermite_poly(e, k, m)),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gamma_is_functorial(seed in any::<u64>()) {
        let mut r = rng(seed);
        let m = r.random_range(1..=3);
        let k = r.random_range(1..=3);
        let basis = ChaosBasis::new(m, k).unwrap();
        let c1 = contraction(&mut r, m);
        let c2 = contraction(&mut r, m);
        let lhs = gamma_operator(&c1, &basis).unwrap().compose(&gamma_operator(&c2, &basis).unwrap()).unwrap();
        let rhs = gamma_operator(&(&c1 * &c2), &basis).unwrap();
        for order in 0..=k {
            prop_assert!((lhs.block(order) - rhs.block(order)).abs().max() <= 1e-9);
        }
    }

    #[test]
    fn transition_blocks_are_contractions(seed in any::<u64>(), t in 0.05..3.0f64) {
        let model = random_stable(seed, 4);
        let op = transition_chaos(&model, t, 3, &Tolerances::default()).unwrap();
        prop_assert!((op.block(0)[(0, 0)] - 1.0).abs() <= 1e-12);
        for k in 0..=3 {
            prop_assert!(op.block_norm(k) <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn order_one_norm_is_semigroup_norm(seed in any::<u64>()) {
        let model = random_stable(seed, 6);
        let tol = Tolerances::default();
        for t in [0.3, 1.0, 3.0] {
            let block = transition_chaos(&model, t, 1, &tol).unwrap().block_norm(1);
            prop_assert!((block - s_infinity_norm(&model, t, &tol).unwrap()).abs() <= 1e-9);
        }
    }

    #[test]
    fn selfadjoint_iff_q_symmetric(seed in any::<u64>()) {
        let model: OuModel = if seed % 2 == 0 { random_q_symmetric(seed, 4) } else { random_q_asymmetric(seed, 4) };
        let tol = Tolerances::default();
        let symmetric = transition_chaos(&model, 0.8, 3, &tol).unwrap().symmetry_defect() <= 1e-9;
        prop_assert_eq!(symmetric, check_q_symmetry(&model, &tol).is_symmetric);
    }

    #[test]
    fn chaos_action_matches_exact_transition(seed in any::<u64>(), t in 0.05..2.0f64) {
        let model = random_full_noise(seed, 3);
        let tol = Tolerances::default();
        let n = model.dim();
        let mut r = rng(seed ^ 3);
        let dirs = gaussian(&mut r, n, 2);
        let outer = Poly::from_terms(
            2,
            [(vec![0, 0], 0.3), (vec![1, 0], -0.8), (vec![1, 1], 1.1), (vec![0, 2], 0.6), (vec![2, 1], -0.4)],
        )
        .unwrap();
        let f = CylindricalFunction::polynomial(dirs, outer).unwrap();
        let w = whiten(&model, &tol).unwrap();
        let basis = ChaosBasis::new(w.rank(), 3).unwrap();
        let coeffs = basis.expand(&w.pull_back(&f.state_polynomial().unwrap()).unwrap()).unwrap();
        let op = transition_chaos(&model, t, 3, &tol).unwrap();
        let moved = op.apply(&coeffs);
        let u = random_vector(&mut r, w.rank());
        let x = w.embedding() * &u;
        let exact = transition_apply(&model, &f, &x, t, TransitionMode::Exact, &tol).unwrap().value.re;
        let chaos = basis.synthesize(&moved, u.as_slice());
        prop_assert!((exact - chaos).abs() <= 1e-8 * (1.0 + exact.abs()), "exact {exact} chaos {chaos}");
    }
}

#[test]
fn basis_is_orthonormal_under_the_standard_gaussian() {
    for m in 1..=3 {
        let basis = ChaosBasis::new(m, 3).unwrap();
        let polys: Vec<Poly> = basis.multi_indices().map(|a| basis_poly(a)).collect();
        let zero = Vector::zeros(m);
        let id = Mat::identity(m, m);
        for (j, p) in polys.iter().enumerate() {
            for (k, q) in polys.iter().enumerate() {
                let g = p.mul(q).gaussian_expectation(&zero, &id).unwrap();
                let want = if j == k { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-12, "m={m} ({j},{k}) -> {g}");
            }
        }
        // evaluate agrees with the explicit polynomial
        let u = [0.3, -1.2, 0.8];
        for (alpha, p) in basis.multi_indices().zip(&polys) {
            assert!((ChaosBasis::evaluate(alpha, &u[..m]) - p.eval(&u[..m])).abs() < 1e-12);
        }
    }
}

#[test]
fn basis_order_is_graded_lexicographic() {
    let basis = ChaosBasis::new(2, 2).unwrap();
    let order: Vec<Vec<u32>> = basis.multi_indices().map(|a| a.to_vec()).collect();
    assert_eq!(
        order,
        vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2]
        ]
    );
}
