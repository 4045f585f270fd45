mod common;

use proptest::prelude::*;
use sqrtdom::formbounds::*;
use sqrtdom::linalg::{c, random_complex_vector, seeded_rng, CVector};
use sqrtdom::mesh::{build_mesh, BoundaryPair, CoefficientFamily, CoefficientSet, IntervalSpec};

#[test]
fn derived_constants_by_hand() {
    // c_0 = sqrt2 * max(1, 1, 1, sqrt2 * 4) = 8; M = 128 * 64 * (1 + 1); eps_0 = min(1, 4 * 1)
    let k = FormBoundConstants::from_norms(2.0, 1.0, 1.0, 1.0);
    assert!((k.c_0 - 8.0).abs() < 1e-12);
    assert!((k.m - 16384.0).abs() < 1e-9);
    assert_eq!(k.eps_qrs, 1.0);
    assert_eq!(k.eps_0, 1.0);
    let zero = FormBoundConstants::from_norms(0.0, 0.0, 0.0, 2.0);
    assert_eq!(zero.eps_0, 1.0);
}

#[test]
fn window_norms_of_constant_coefficients() {
    let mesh = build_mesh(IntervalSpec::finite(0.0, 20.0), 200).unwrap();
    let coeffs = CoefficientFamily::Constant { p: 1.0, q: 2.0, r: 3.0, s: 0.5 }.sample(&mesh).unwrap();
    let k = locunif_norms(&coeffs, &mesh);
    assert!((k.c_q - 2.0).abs() < 1e-12);
    assert!((k.c_r - 9.0).abs() < 1e-12);
    assert!((k.c_s - 0.25).abs() < 1e-12);
    assert!(!k.window_covers_domain);
    let short = build_mesh(IntervalSpec::finite(0.0, 0.5), 20).unwrap();
    let k = locunif_norms(&CoefficientFamily::Constant { p: 1.0, q: 2.0, r: 0.0, s: 0.0 }.sample(&short).unwrap(), &short);
    assert!((k.c_q - 1.0).abs() < 1e-12);
    assert!(k.window_covers_domain);
}

#[test]
fn form_bound_battery() {
    for family in common::families() {
        for interval in common::intervals() {
            for bc in [BoundaryPair::dirichlet(), BoundaryPair::neumann()] {
                let f = common::forms(family, interval, bc, 80);
                let k = locunif_norms(&f.coefficients, &build_mesh(interval, 80).unwrap());
                let eps: Vec<f64> = (0..16).map(|i| k.eps_0 * 10f64.powf(-3.0 + 3.0 * i as f64 / 16.0)).collect();
                let mut rng = seeded_rng(3);
                for _ in 0..100 {
                    let v = random_complex_vector(f.n_dof(), &mut rng);
                    for &e in &eps {
                        for row in check_form_bound(&v, &f, &k, e).unwrap() {
                            assert!(row.slack >= -1e-10, "{family:?} {interval:?}: {row:?}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn trudinger_battery() {
    let mesh = build_mesh(IntervalSpec::finite(0.0, 3.0), 60).unwrap();
    let coeffs = CoefficientFamily::Spike { amplitude: 2.0, center: 1.3 }.sample(&mesh).unwrap();
    let mut rng = seeded_rng(17);
    for _ in 0..200 {
        let f = random_complex_vector(61, &mut rng);
        for eps in [1e-3, 0.1, 1.0, 10.0] {
            let r = check_trudinger(&f, &coeffs.q, &mesh, eps).unwrap();
            assert!(r.min_node_slack() >= -1e-10, "{eps}");
            assert!(r.weighted_slack() >= -1e-10, "{eps}");
        }
    }
}

#[test]
fn rejects_out_of_range_eps() {
    let f = common::forms(common::families()[0], common::intervals()[0], BoundaryPair::dirichlet(), 10);
    let k = FormBoundConstants::from_norms(1.0, 1.0, 1.0, 1.0);
    let v = CVector::from_element(f.n_dof(), c(1.0, 0.0));
    assert!(check_form_bound(&v, &f, &k, k.eps_0).is_err());
    assert!(check_form_bound(&v, &f, &k, 0.0).is_err());
    assert!(check_form_bound(&CVector::zeros(3), &f, &k, 0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Both sides are quadratic in the vector, so slack scales by `|alpha|^2`.
    #[test]
    fn margins_scale_quadratically(seed in 0u64..100_000, re in -3.0f64..3.0, im in -3.0f64..3.0, e in 0.001f64..0.99) {
        prop_assume!(re * re + im * im > 1e-3);
        let f = common::forms(common::families()[1], common::intervals()[0], BoundaryPair::dirichlet(), 24);
        let mesh = build_mesh(common::intervals()[0], 24).unwrap();
        let k = locunif_norms(&f.coefficients, &mesh);
        let v = random_complex_vector(f.n_dof(), &mut seeded_rng(seed));
        let alpha = c(re, im);
        let a = check_form_bound(&v, &f, &k, e * k.eps_0).unwrap();
        let b = check_form_bound(&(&v * alpha), &f, &k, e * k.eps_0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let s = alpha.norm_sqr();
            prop_assert!((y.lhs - s * x.lhs).abs() <= 1e-10 * s * x.bound);
            prop_assert!((y.bound - s * x.bound).abs() <= 1e-10 * s * x.bound);
            prop_assert!(x.slack >= -1e-10 * x.bound);
        }
    }

    /// Any coefficient set with bounded data satisfies the bound at its own constants.
    #[test]
    fn random_coefficients_satisfy_bound(seed in 0u64..100_000, amp in 0.1f64..5.0) {
        let mesh = build_mesh(IntervalSpec::finite(0.0, 2.0), 30).unwrap();
        let mut rng = seeded_rng(seed);
        let pick = |v: CVector| v.iter().map(|z| z * amp).collect::<Vec<_>>();
        let p: Vec<_> = random_complex_vector(30, &mut rng).iter().map(|z| c(1.0 + z.re.abs(), 0.3 * z.im)).collect();
        let coeffs = CoefficientSet::from_samples(
            p,
            pick(random_complex_vector(30, &mut rng)),
            pick(random_complex_vector(30, &mut rng)),
            pick(random_complex_vector(30, &mut rng)),
        ).unwrap();
        let f = sqrtdom::assembly::assemble_forms(&mesh, &coeffs, BoundaryPair::dirichlet(), sqrtdom::assembly::MassTreatment::Lumped).unwrap();
        let k = locunif_norms(&coeffs, &mesh);
        let v = random_complex_vector(f.n_dof(), &mut rng);
        for e in [0.01, 0.5, 0.99] {
            for row in check_form_bound(&v, &f, &k, e * k.eps_0).unwrap() {
                prop_assert!(row.slack >= -1e-10 * row.bound, "{:?}", row);
            }
        }
    }
}
