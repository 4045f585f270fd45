use proptest::prelude::*;
use sqrtdom::linalg::{c, identity, random_complex_matrix, rel_diff, seeded_rng, CMatrix};
use sqrtdom::matfun::*;

/// Hermitian part `I + G G*/n`, plus an anti-Hermitian part of comparable size.
fn random_accretive(n: usize, seed: u64) -> CMatrix {
    let mut rng = seeded_rng(seed);
    let g = random_complex_matrix(n, n, &mut rng);
    let k = random_complex_matrix(n, n, &mut rng);
    let herm = &g * g.adjoint() * c(1.0 / n as f64, 0.0) + identity(n);
    let skew = (&k - k.adjoint()) * c(0.5 / (n as f64).sqrt(), 0.0);
    herm + skew
}

#[test]
fn quadrature_half_power_matches_denman_beavers() {
    for seed in 1..=3 {
        let h = random_accretive(50, seed);
        let quad = frac_power_quad(&h, 0.5, QuadratureSpec::new(400, 8).unwrap()).unwrap();
        let db = sqrt_db(&h).unwrap();
        let err = rel_diff(&quad, &db);
        assert!(err <= 1e-6, "seed {seed}: {err:e}");
        assert!(rel_diff(&(&db * &db), &h) < 1e-12);
    }
}

#[test]
fn power_laws_hold() {
    let h = random_accretive(50, 7);
    let spec = QuadratureSpec::new(400, 8).unwrap();
    for (alpha, beta) in [(0.25, 0.5), (0.3, 0.4), (0.1, 0.2)] {
        let r = check_power_laws(&h, alpha, beta, spec).unwrap();
        assert!(r.adjoint_residual <= 1e-5, "{alpha} {beta}: {r:?}");
        assert!(r.semigroup_residual <= 1e-5, "{alpha} {beta}: {r:?}");
    }
}

#[test]
fn node_doubling_converges_at_least_fourfold() {
    let h = random_accretive(50, 11);
    let db = sqrt_db(&h).unwrap();
    let errs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| rel_diff(&frac_power_quad(&h, 0.5, QuadratureSpec::new(n, 2).unwrap()).unwrap(), &db))
        .collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] >= 4.0, "{errs:?}");
    }
}

#[test]
fn resolvent_identity() {
    let h = random_accretive(20, 3);
    let (z1, z2) = (c(-1.0, 2.0), c(-3.0, -0.5));
    let r1 = resolvent(&h, z1).unwrap();
    let r2 = resolvent(&h, z2).unwrap();
    assert!(rel_diff(&(&r1 - &r2), &((&r1 * &r2) * (z1 - z2))) < 1e-12);
}

#[test]
fn negative_real_eigenvalue_is_rejected() {
    let h = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(-2.0, 0.0)]));
    assert!(principal_sqrt(&h).is_err());
    assert!(frac_power_quad(&h, 0.5, QuadratureSpec::default()).is_err());
}

#[test]
fn hermitian_and_quadrature_routes_agree() {
    let mut rng = seeded_rng(5);
    let g = random_complex_matrix(12, 12, &mut rng);
    let h = &g * g.adjoint() + identity(12);
    for alpha in [0.2, 0.5, 0.8] {
        let a = frac_power(&h, alpha, QuadratureSpec::default()).unwrap();
        let b = frac_power_quad(&h, alpha, QuadratureSpec::default()).unwrap();
        assert!(rel_diff(&a, &b) < 1e-9, "alpha {alpha}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sqrt_squares_back(seed in 0u64..1_000_000, n in 2usize..12) {
        let h = random_accretive(n, seed);
        let r = principal_sqrt(&h).unwrap();
        prop_assert!(rel_diff(&(&r * &r), &h) < 1e-11);
        // principal branch: spectrum of the root in the right half-plane
        let ev = sqrtdom::linalg::eigenvalues(&r).unwrap();
        prop_assert!(ev.iter().all(|z| z.re > 0.0));
    }

    #[test]
    fn scalar_shift_commutes_with_powers(seed in 0u64..1_000_000, alpha in 0.05f64..0.95) {
        let h = random_accretive(6, seed);
        let p = frac_power_quad(&h, alpha, QuadratureSpec::default()).unwrap();
        // (t H)^alpha = t^alpha H^alpha
        let t = 3.0f64;
        let pt = frac_power_quad(&(&h * c(t, 0.0)), alpha, QuadratureSpec::default()).unwrap();
        prop_assert!(rel_diff(&pt, &(p * c(t.powf(alpha), 0.0))) < 1e-8);
    }
}
