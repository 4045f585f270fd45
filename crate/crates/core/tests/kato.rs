mod common;

use proptest::prelude::*;
use sqrtdom::kato::*;
use sqrtdom::linalg::{c, identity, rel_diff, shifted, spectral_norm, CMatrix, Factorized, C64};

use common::{admissible_grid, families, forms, intervals};
use sqrtdom::mesh::BoundaryPair;

const N: usize = 60;

#[test]
fn full_triple_matches_direct_assembly() {
    for family in families() {
        for interval in intervals() {
            for bc in [BoundaryPair::dirichlet(), BoundaryPair::neumann()] {
                let f = forms(family, interval, bc, N);
                let direct = f.operator().unwrap().matrix;
                let t0 = f.principal_operator().unwrap().matrix;
                let pert = build_factorization(&f, PerturbationVariant::FullTriple).unwrap();
                let report = verify_identity(&direct, &t0, &pert, &admissible_grid(&direct, &t0)).unwrap();
                assert_eq!(report.rows.len(), 5, "{family:?} {interval:?}");
                assert!(report.max_rel_error <= 1e-9, "{family:?} {interval:?} {bc:?}: {}", report.max_rel_error);
            }
        }
    }
}

#[test]
fn factor_product_is_the_perturbation() {
    for family in families() {
        let f = forms(family, intervals()[0], common::boundary_pairs()[2], N);
        let direct = f.operator().unwrap().matrix;
        let t0 = f.principal_operator().unwrap().matrix;
        let pert = build_factorization(&f, PerturbationVariant::FullTriple).unwrap();
        let diff = &direct - &t0;
        assert!(rel_diff(&pert.product(), &diff) < 1e-12, "{family:?}");
    }
}

#[test]
fn two_step_matches_one_shot() {
    for family in families() {
        for interval in intervals() {
            let f = forms(family, interval, BoundaryPair::dirichlet(), N);
            let direct = f.operator().unwrap().matrix;
            let two = TwoStep::new(&f).unwrap();
            for z in admissible_grid(&direct, &two.t0) {
                let r = two.resolvent(z).unwrap();
                let d = Factorized::new(shifted(&direct, z)).unwrap().inverse();
                assert!(rel_diff(&r, &d) <= 1e-9, "{family:?} {interval:?} z={z}");
            }
        }
    }
}

#[test]
fn factored_resolvent_satisfies_resolvent_identity() {
    let f = forms(families()[1], intervals()[0], BoundaryPair::dirichlet(), N);
    let t0 = f.principal_operator().unwrap().matrix;
    let direct = f.operator().unwrap().matrix;
    let pert = build_factorization(&f, PerturbationVariant::FullTriple).unwrap();
    let zs = admissible_grid(&direct, &t0);
    let (z1, z2) = (zs[1], zs[3]);
    let r1 = perturbed_resolvent(&t0, &pert, z1).unwrap();
    let r2 = perturbed_resolvent(&t0, &pert, z2).unwrap();
    let lhs = &r1 - &r2;
    let rhs = (&r1 * &r2) * (z1 - z2);
    assert!(rel_diff(&lhs, &rhs) < 1e-9);
}

#[test]
fn shifts_beyond_e_star_are_admissible() {
    let f = forms(families()[1], intervals()[0], BoundaryPair::dirichlet(), N);
    let t0 = f.principal_operator().unwrap().matrix;
    let pert = build_factorization(&f, PerturbationVariant::QrPair).unwrap();
    let grid: Vec<f64> = (0..7).map(|k| 10f64.powi(k)).collect();
    let profile = decay_profile(&t0, &pert, &grid, None).unwrap();
    let e_star = profile.e_star.expect("grid brackets the half-norm level");
    for e in [e_star, 2.0 * e_star, 10.0 * e_star] {
        let k = kato_k(&t0, &pert, c(-e, 0.0)).unwrap();
        assert!(spectral_norm(&k) <= 0.5 + 1e-6, "E={e}");
        assert!(perturbed_resolvent(&t0, &pert, c(-e, 0.0)).is_ok());
    }
}

#[test]
fn compressed_norms_match_full_matrices() {
    let f = forms(families()[1], intervals()[1], BoundaryPair::neumann(), N);
    let t0 = f.principal_operator().unwrap().matrix;
    for variant in [PerturbationVariant::QrPair, PerturbationVariant::SPair, PerturbationVariant::FullTriple] {
        let pert = build_factorization(&f, variant).unwrap();
        for z in [c(-3.0, 0.0), c(-10.0, 4.0), c(-1e4, 0.0)] {
            let full = spectral_norm(&kato_k(&t0, &pert, z).unwrap());
            assert!((kato_k_norm(&t0, &pert, z).unwrap() - full).abs() <= 1e-10 * full, "{variant:?} {z}");
        }
    }
}

#[test]
fn singular_unperturbed_point_is_reported() {
    let t0 = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]));
    let pert = FactoredPerturbation {
        a: identity(2),
        b: identity(2),
        variant: PerturbationVariant::QrPair,
        blocks: vec![],
    };
    assert!(matches!(perturbed_resolvent(&t0, &pert, c(1.0, 0.0)), Err(KatoError::UnperturbedSpectrum(_))));
}

fn matrix(n: usize, m: usize, v: &[(f64, f64)]) -> CMatrix {
    CMatrix::from_fn(n, m, |i, j| {
        let (re, im) = v[i * m + j];
        c(re, im)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Resolvent of `T0 + B* A` through the factorization equals direct inversion.
    #[test]
    fn random_factorizations(
        t in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 16),
        a in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
        b in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12),
        z_im in -3.0f64..3.0,
    ) {
        let g = matrix(4, 4, &t);
        let t0 = &g * g.adjoint() + identity(4);
        let a = matrix(3, 4, &a);
        let b = matrix(3, 4, &b);
        let pert = FactoredPerturbation { a: a.clone(), b: b.clone(), variant: PerturbationVariant::QrPair, blocks: vec![] };
        let full = &t0 + b.adjoint() * &a;
        let shift = full.iter().map(|v| v.norm()).sum::<f64>() + 1.0;
        let z: C64 = c(-shift, z_im);
        let direct = Factorized::new(shifted(&full, z)).unwrap().inverse();
        let factored = perturbed_resolvent(&t0, &pert, z).unwrap();
        prop_assert!(rel_diff(&factored, &direct) < 1e-10);
    }
}
