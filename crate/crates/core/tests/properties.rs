use pentagram::optimizer::random_hermitian;
use pentagram::rigidity::{build_isometry, Side};
use pentagram::strategy::disagreement_probability;
use pentagram::tensor::{
    controlled, exp_i_hermitian, hermitian_eigendecomposition, kron, swap_factors, ComplexMatrix, C64,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rows * cols).prop_map(move |v| {
        let data = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        ComplexMatrix::from_row_major(rows, cols, data).unwrap()
    })
}

fn small_dim() -> impl Strategy<Value = usize> {
    1usize..=3
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    exp_i_hermitian(&random_hermitian(rng, n).unwrap(), 3.0).unwrap()
}

/// `U diag(±1) U†` with a random sign pattern.
fn random_reflection(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
    use rand::Rng;
    let u = random_unitary(rng, n);
    let signs: Vec<C64> = (0..n)
        .map(|_| C64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
        .collect();
    &(&u * &ComplexMatrix::diagonal(&signs)) * &u.adjoint()
}

fn normalized(m: ComplexMatrix) -> ComplexMatrix {
    let n = m.frobenius_norm();
    m.scale_real(1.0 / n)
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
    (a - b).frobenius_norm() <= tol * (1.0 + a.frobenius_norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kron_mixed_product(
        (a, b, c, d) in (small_dim(), small_dim(), small_dim(), small_dim(), small_dim(), small_dim())
            .prop_flat_map(|(m, n, p, q, r, s)| (matrix(m, n), matrix(p, q), matrix(n, r), matrix(q, s)))
    ) {
        let lhs = &kron(&a, &b) * &kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn kron_is_associative(
        (a, b, c) in (small_dim(), small_dim(), small_dim(), small_dim(), small_dim(), small_dim())
            .prop_flat_map(|(m, n, p, q, r, s)| (matrix(m, n), matrix(p, q), matrix(r, s)))
    ) {
        let lhs = kron(&kron(&a, &b), &c);
        let rhs = kron(&a, &kron(&b, &c));
        prop_assert!(close(&lhs, &rhs, 1e-14));
    }

    #[test]
    fn kron_respects_adjoint(a in matrix(2, 3), b in matrix(3, 2)) {
        prop_assert!(close(&kron(&a, &b).adjoint(), &kron(&a.adjoint(), &b.adjoint()), 0.0));
    }

    #[test]
    fn swap_exchanges_factors(a in matrix(2, 1), b in matrix(3, 1)) {
        prop_assert!(close(&(&swap_factors(2, 3) * &kron(&a, &b)), &kron(&b, &a), 1e-15));
    }

    #[test]
    fn controlled_is_a_homomorphism(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(&mut rng, n);
        let v = random_unitary(&mut rng, n);
        let cu = controlled(&u).unwrap();
        let cv = controlled(&v).unwrap();
        prop_assert!(close(&(&cu * &cv), &controlled(&(&u * &v)).unwrap(), 1e-12));
        prop_assert!(close(&cu.adjoint(), &controlled(&u.adjoint()).unwrap(), 1e-15));
        prop_assert!(cu.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn frobenius_norm_is_unitarily_invariant(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = random_unitary(&mut rng, n);
        let v = random_unitary(&mut rng, n);
        let a = random_hermitian(&mut rng, n).unwrap();
        let moved = &(&u * &a) * &v;
        prop_assert!((moved.frobenius_norm() - a.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn disagreement_is_quarter_norm(seed in any::<u64>(), da in 1usize..=6, db in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = random_reflection(&mut rng, da);
        let s = random_reflection(&mut rng, db);
        let l = normalized(ComplexMatrix::from_fn(da, db, |_, _| {
            use rand::Rng;
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        }));
        let quarter = 0.25 * (&(&r * &l) - &(&l * &s)).frobenius_norm_sqr();
        prop_assert!((disagreement_probability(&r, &l, &s) - quarter).abs() < 1e-10);
    }

    #[test]
    fn isometry_from_random_reflections(seed in any::<u64>(), d in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<_> = (0..3).map(|_| random_reflection(&mut rng, d)).collect();
        let z: Vec<_> = (0..3).map(|_| random_reflection(&mut rng, d)).collect();
        let iso = build_isometry(Side::Alice, &x, &z).unwrap();
        prop_assert_eq!(iso.matrix.shape(), (8 * d, d));
        prop_assert!(iso.defect() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn eigendecomposition_reconstructs(seed in any::<u64>(), n in 1usize..=64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, n).unwrap();
        let eig = hermitian_eigendecomposition(&h).unwrap();
        prop_assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(eig.vectors.unitarity_deviation() < 1e-10);
        let rebuilt = eig.apply(|x| C64::new(x, 0.0));
        prop_assert!((&rebuilt - &h).frobenius_norm() < 1e-10);
    }
}
