//! Property tests for the structural invariants: tensor algebra, eigensystem
//! fidelity, distribution normalization and symmetry, compatibility
//! reduction, and statistical consistency of the sampler.

use proptest::prelude::*;

use chsh_seq::chsh::{classify_bound, correlation, symmetrized_product, BoundClass};
use chsh_seq::montecarlo;
use chsh_seq::observables::{DichotomicObservable, Sign, Signature, Site};
use chsh_seq::sequential::{
    born_probability, collapse, mixed_joint_distribution, sequential_probability, singlet_state,
    QuantumState,
};
use chsh_seq::{Complex64, ComplexMatrix};

fn random_obs(seed: u64, dim: usize) -> DichotomicObservable {
    DichotomicObservable::random(seed, dim, Signature::balanced(dim).unwrap()).unwrap()
}

fn matrix_from_parts(re: &[f64], im: &[f64], dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(re[i * dim + j], im[i * dim + j])
    })
}

fn hermitian_from_parts(re: &[f64], im: &[f64], dim: usize) -> ComplexMatrix {
    let g = matrix_from_parts(re, im, dim);
    (&g + &g.adjoint()).scale(0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn tensor_mixed_product_identity(
        re in prop::collection::vec(-2.0f64..2.0, 16),
        im in prop::collection::vec(-2.0f64..2.0, 16),
    ) {
        let a = matrix_from_parts(&re[0..4], &im[0..4], 2);
        let b = matrix_from_parts(&re[4..8], &im[4..8], 2);
        let c = matrix_from_parts(&re[8..12], &im[8..12], 2);
        let d = matrix_from_parts(&re[12..16], &im[12..16], 2);
        let lhs = a.tensor_product(&b).matmul(&c.tensor_product(&d)).unwrap();
        let rhs = a.matmul(&c).unwrap().tensor_product(&b.matmul(&d).unwrap());
        prop_assert!((&lhs - &rhs).frobenius_norm() < 1e-12);
    }

    #[test]
    fn eigensystem_reconstructs_random_hermitian(
        dim in 2usize..=6,
        re in prop::collection::vec(-3.0f64..3.0, 36),
        im in prop::collection::vec(-3.0f64..3.0, 36),
    ) {
        let h = hermitian_from_parts(&re[0..dim * dim], &im[0..dim * dim], dim);
        let eig = h.hermitian_eig().unwrap();
        prop_assert!(eig.reconstruction_residual(&h) <= 1e-10);
        prop_assert!(eig.orthonormality_deviation() <= 1e-10);
        let mut sorted = eig.eigenvalues.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(&sorted, &eig.eigenvalues);
    }

    #[test]
    fn operator_norm_is_submultiplicative(
        re in prop::collection::vec(-2.0f64..2.0, 32),
        im in prop::collection::vec(-2.0f64..2.0, 32),
    ) {
        let a = matrix_from_parts(&re[0..16], &im[0..16], 4);
        let b = matrix_from_parts(&re[16..32], &im[16..32], 4);
        let ab = a.matmul(&b).unwrap();
        prop_assert!(
            ab.operator_norm().unwrap()
                <= a.operator_norm().unwrap() * b.operator_norm().unwrap() + 1e-9
        );
    }

    #[test]
    fn mixed_joint_is_normalized_and_order_symmetric(seed in 0u64..1_000_000, dim_sel in 0u8..2) {
        let dim = if dim_sel == 0 { 2 } else { 4 };
        let a = random_obs(seed.wrapping_mul(3), dim);
        let b = random_obs(seed.wrapping_mul(3).wrapping_add(1), dim);
        let psi = QuantumState::seeded_random(dim, seed.wrapping_mul(3).wrapping_add(2));
        let ab = mixed_joint_distribution(&psi, &a, &b).unwrap();
        let ba = mixed_joint_distribution(&psi, &b, &a).unwrap();
        let total: f64 = ab.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-10);
        for i in Sign::BOTH {
            for j in Sign::BOTH {
                prop_assert!((ab.prob(i, j) - ba.prob(j, i)).abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn compatible_observables_have_no_order_effects(seed in 0u64..1_000_000) {
        // Lifted observables on opposite factors commute, so the two
        // sequential orders agree cell by cell and the mixed distribution
        // equals either one.
        let a = random_obs(seed.wrapping_mul(3), 2).lift(Site::Left, 2);
        let b = random_obs(seed.wrapping_mul(3).wrapping_add(1), 2).lift(Site::Right, 2);
        let psi = QuantumState::seeded_random(4, seed.wrapping_mul(3).wrapping_add(2));
        let dist = mixed_joint_distribution(&psi, &a, &b).unwrap();
        for i in Sign::BOTH {
            for j in Sign::BOTH {
                let ab = sequential_probability(&psi, &a, i, &b, j).unwrap();
                let ba = sequential_probability(&psi, &b, j, &a, i).unwrap();
                prop_assert!((ab - ba).abs() <= 1e-12);
                prop_assert!((dist.prob(i, j) - ab).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn born_outcomes_are_complete(seed in 0u64..1_000_000) {
        let obs = random_obs(seed, 4);
        let psi = QuantumState::seeded_random(4, seed.wrapping_add(1));
        let plus = born_probability(&psi, obs.proj_plus()).unwrap();
        let minus = born_probability(&psi, obs.proj_minus()).unwrap();
        prop_assert!((0.0..=1.0).contains(&plus));
        prop_assert!((plus + minus - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn collapse_is_idempotent(seed in 0u64..1_000_000) {
        let obs = random_obs(seed, 4);
        let psi = QuantumState::seeded_random(4, seed.wrapping_add(7));
        if born_probability(&psi, obs.proj_plus()).unwrap() > 1e-6 {
            let once = collapse(&psi, obs.proj_plus()).unwrap();
            let twice = collapse(&once, obs.proj_plus()).unwrap();
            let gap: f64 = once
                .amplitudes()
                .iter()
                .zip(twice.amplitudes())
                .map(|(x, y)| (x - y).norm_sqr())
                .sum::<f64>()
                .sqrt();
            prop_assert!(gap <= 1e-10);
            prop_assert!((once.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn central_identity_holds(seed in 0u64..1_000_000) {
        let a = random_obs(seed.wrapping_mul(11), 4);
        let b = random_obs(seed.wrapping_mul(11).wrapping_add(1), 4);
        let psi = QuantumState::seeded_random(4, seed.wrapping_mul(11).wrapping_add(2));
        let e = correlation(&psi, &a, &b).unwrap();
        let via_op = symmetrized_product(&a, &b)
            .unwrap()
            .expectation(psi.amplitudes())
            .unwrap()
            .re;
        prop_assert!((e - via_op).abs() <= 1e-12);
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&e));
    }

    #[test]
    fn singlet_correlation_matches_cosine_law(theta_a in 0.0f64..std::f64::consts::PI, theta_b in 0.0f64..std::f64::consts::PI) {
        let a = DichotomicObservable::from_spin_direction(theta_a, 0.0).lift(Site::Left, 2);
        let b = DichotomicObservable::from_spin_direction(theta_b, 0.0).lift(Site::Right, 2);
        let e = correlation(&singlet_state(), &a, &b).unwrap();
        prop_assert!((e + (theta_a - theta_b).cos()).abs() <= 1e-12);
    }

    #[test]
    fn classification_is_monotone(value in -4.0f64..4.0) {
        let class = classify_bound(value);
        let v = value.abs();
        match class {
            BoundClass::WithinClassical => prop_assert!(v <= 2.0 + 1e-9),
            BoundClass::WithinTsirelson => {
                prop_assert!(v > 2.0 && v <= 2.0 * std::f64::consts::SQRT_2 + 1e-9)
            }
            BoundClass::WithinSqrt3 => {
                prop_assert!(v > 2.0 * std::f64::consts::SQRT_2 && v <= 2.0 * 3.0f64.sqrt() + 1e-9)
            }
            BoundClass::BeyondSqrt3 => prop_assert!(v > 2.0 * 3.0f64.sqrt()),
        }
    }

    #[test]
    fn sampler_determinism_across_seeds(seed in 0u64..100_000, n in 1u64..5_000) {
        let a = random_obs(seed, 2);
        let b = random_obs(seed.wrapping_add(1), 2);
        let psi = QuantumState::seeded_random(2, seed.wrapping_add(2));
        let first = montecarlo::run(n, seed, &psi, &a, &b).unwrap();
        let second = montecarlo::run_serial(n, seed, &psi, &a, &b).unwrap();
        prop_assert_eq!(first, second);
    }
}

/// The empirical CHSH over the four simulated pairs must agree with the
/// analytic value within five combined binomial standard errors at n = 10⁶.
#[test]
fn empirical_chsh_tracks_analytic_value() {
    let psi = QuantumState::basis(2, 0);
    let quad = [
        random_obs(501, 2),
        random_obs(502, 2),
        random_obs(503, 2),
        random_obs(504, 2),
    ];
    let pairs = [
        (&quad[0], &quad[2]),
        (&quad[0], &quad[3]),
        (&quad[1], &quad[3]),
        (&quad[1], &quad[2]),
    ];
    let n = 1_000_000u64;
    let mut empirical = [0.0f64; 4];
    let mut analytic = [0.0f64; 4];
    let mut variance = 0.0f64;
    for (k, (a, b)) in pairs.into_iter().enumerate() {
        let stats = montecarlo::run(n, 7_000 + k as u64, &psi, a, b).unwrap();
        let dist = mixed_joint_distribution(&psi, a, b).unwrap();
        for i in Sign::BOTH {
            for j in Sign::BOTH {
                empirical[k] += i.value() * j.value() * stats.frequency(i, j);
                analytic[k] += i.value() * j.value() * dist.prob(i, j);
            }
        }
        // Var(Σ ij f_ij) = (1 − E²)/n for a multinomial draw.
        variance += (1.0 - analytic[k] * analytic[k]) / n as f64;
    }
    let chsh_emp = empirical[0] - empirical[1] + empirical[2] + empirical[3];
    let chsh = analytic[0] - analytic[1] + analytic[2] + analytic[3];
    let combined_se = variance.sqrt();
    assert!(
        (chsh_emp - chsh).abs() <= 5.0 * combined_se,
        "empirical {chsh_emp} vs analytic {chsh} (5σ = {})",
        5.0 * combined_se
    );
}
