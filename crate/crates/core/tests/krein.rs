use std::f64::consts::PI;

use sqrtdom::assembly::{assemble_forms, FormMatrices, MassTreatment};
use sqrtdom::krein::*;
use sqrtdom::linalg::{c, shifted, Factorized, C64};
use sqrtdom::matfun::principal_sqrt;
use sqrtdom::mesh::{build_mesh, BoundaryCondition, BoundaryPair, CoefficientSet, IntervalSpec};

fn forms(n: usize, left: BoundaryCondition) -> FormMatrices {
    let mesh = build_mesh(IntervalSpec::finite(0.0, 1.0), n).unwrap();
    let coeffs = CoefficientSet::laplacian(&mesh);
    assemble_forms(&mesh, &coeffs, BoundaryPair::new(left, BoundaryCondition::dirichlet()), MassTreatment::Lumped)
        .unwrap()
}

fn resolvent(f: &FormMatrices, z: C64) -> sqrtdom::linalg::CMatrix {
    Factorized::new(shifted(&f.operator().unwrap().matrix, z)).unwrap().inverse()
}

fn krein_error(n: usize, theta: BoundaryCondition, z: C64) -> f64 {
    let dir = forms(n, BoundaryCondition::dirichlet());
    let robin = forms(n, theta);
    let table = krein_resolvent(&resolvent(&dir, z), &dir, z, theta).unwrap();
    let direct = KernelTable::from_operator(KernelKind::Green, &resolvent(&robin, z), &robin, z);
    table.rel_max_diff(&direct)
}

fn thetas() -> Vec<BoundaryCondition> {
    [c(PI / 2.0, 0.0), c(PI / 4.0, 0.0), c(1.0, 0.5)].iter().map(|&t| BoundaryCondition::robin(t).unwrap()).collect()
}

#[test]
fn krein_matches_direct_robin_at_second_order() {
    for theta in thetas() {
        for z in [c(-5.0, 0.0), c(-2.0, 3.0)] {
            let e: Vec<f64> = [64, 128, 256].iter().map(|&n| krein_error(n, theta, z)).collect();
            for w in e.windows(2) {
                let order = (w[0] / w[1]).log2();
                assert!(order >= 1.8, "theta={theta} z={z}: errors {e:?}");
            }
        }
    }
}

#[test]
fn real_theta_kernel_is_symmetric() {
    let dir = forms(64, BoundaryCondition::dirichlet());
    let z = c(-5.0, 0.0);
    let t = krein_resolvent(&resolvent(&dir, z), &dir, z, BoundaryCondition::robin(c(PI / 4.0, 0.0)).unwrap()).unwrap();
    let asym = (&t.values - t.values.transpose()).iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(asym < 1e-12 * t.max_abs());
}

#[test]
fn small_angle_recovers_dirichlet() {
    let mesh = build_mesh(IntervalSpec::finite(0.0, 1.0), 32).unwrap();
    let z = c(-3.0, 1.0);
    let dirichlet = green_table(&mesh, z, BoundaryCondition::dirichlet()).unwrap();
    let mut last = f64::INFINITY;
    for theta in [1e-2, 1e-4, 1e-6] {
        let t = green_table(&mesh, z, BoundaryCondition::robin(c(theta, 0.0)).unwrap()).unwrap();
        let diff = (&t.values - &dirichlet.values).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(diff < last);
        last = diff;
    }
    assert!(last < 1e-5);
}

#[test]
fn green_columns_solve_the_equation_off_diagonal() {
    let z = c(-2.0, 1.0);
    let theta = BoundaryCondition::robin(c(1.0, 0.5)).unwrap();
    let xp = 0.4;
    let mut errs = Vec::new();
    for h in [1e-2, 5e-3] {
        let g = |x: f64| krein_green(z, theta, x, xp, 0.0, 1.0).unwrap();
        let mut worst = 0.0f64;
        for x in [0.1, 0.2, 0.7, 0.9] {
            let lap = -(g(x + h) - g(x) * 2.0 + g(x - h)) / (h * h);
            worst = worst.max((lap - z * g(x)).norm());
        }
        errs.push(worst);
    }
    assert!(errs[1] < errs[0] / 3.5, "{errs:?}");
    assert!(errs[1] < 1e-4);
}

#[test]
fn sqrt_kernel_vanishes_at_b_and_squares_to_resolvent() {
    let theta = BoundaryCondition::robin(c(1.0, 0.5)).unwrap();
    let e = 10.0;
    let mut errs = Vec::new();
    for n in [32, 64] {
        let mesh = build_mesh(IntervalSpec::finite(0.0, 1.0), n).unwrap();
        let table = sqrt_kernel(&mesh, e, theta).unwrap();
        let last = table.values.nrows() - 1;
        for j in 0..=last {
            assert_eq!(table.values[(last, j)], c(0.0, 0.0));
        }
        let robin = forms(n, theta);
        let op = table.to_operator(&robin).unwrap();
        let shifted_h = shifted(&robin.operator().unwrap().matrix, c(-e, 0.0));
        let root_inv = Factorized::new(principal_sqrt(&shifted_h).unwrap()).unwrap().inverse();
        let res = Factorized::new(shifted_h).unwrap().inverse();
        let sq = &op * &op;
        errs.push((sqrtdom::linalg::rel_diff(&op, &root_inv), sqrtdom::linalg::rel_diff(&sq, &res)));
    }
    eprintln!("{errs:?}");
    assert!(errs[1].0 < errs[0].0 && errs[1].1 < errs[0].1);
    assert!(errs[1].0 < 0.05 && errs[1].1 < 0.05);
}

#[test]
fn bessel_bound_holds_on_grid() {
    let theta = BoundaryCondition::neumann();
    let xs = [0.1, 0.3, 0.5, 0.7, 0.9];
    let points: Vec<(f64, f64)> = xs.iter().flat_map(|&x| xs.iter().map(move |&y| (x, y))).collect();
    for e in [25.0, 100.0] {
        let constant = fit_bound_constant(e, &points, theta, 0.0, 1.0).unwrap();
        for &(x, y) in &points {
            let b = bessel_bound_check(e, x, y, theta, 0.0, 1.0, constant).unwrap();
            assert!(b.slack >= 0.0, "{x} {y}: {b:?}");
        }
    }
}
