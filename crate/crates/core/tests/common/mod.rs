#![allow(dead_code)]

use sqrtdom::assembly::{assemble_forms, FormMatrices, MassTreatment};
use sqrtdom::linalg::{c, CMatrix, C64};
use sqrtdom::matfun::safe_shift;
use sqrtdom::mesh::{build_mesh, BoundaryCondition, BoundaryPair, CoefficientFamily, IntervalSpec};

pub fn families() -> Vec<CoefficientFamily> {
    vec![
        CoefficientFamily::Constant { p: 1.0, q: 1.0, r: 1.0, s: 1.0 },
        CoefficientFamily::ComplexConstant { p: c(1.0, 0.5), q: c(2.0, 0.0), r: c(1.0, 0.0), s: c(0.0, 1.0) },
        // mixed-sign potential and drift
        CoefficientFamily::Constant { p: 2.0, q: -3.0, r: -1.5, s: 0.75 },
        CoefficientFamily::Sawtooth { amplitude: 1.0, period: 0.25 },
        CoefficientFamily::Spike { amplitude: 1.0, center: 0.5 },
    ]
}

pub fn intervals() -> Vec<IntervalSpec> {
    vec![IntervalSpec::finite(0.0, 1.0), IntervalSpec::half_line(0.0, 20.0), IntervalSpec::full_line(20.0)]
}

pub fn boundary_pairs() -> Vec<BoundaryPair> {
    vec![
        BoundaryPair::dirichlet(),
        BoundaryPair::neumann(),
        BoundaryPair::new(BoundaryCondition::robin(c(1.0, 0.5)).unwrap(), BoundaryCondition::dirichlet()),
    ]
}

pub fn forms(family: CoefficientFamily, interval: IntervalSpec, bc: BoundaryPair, n: usize) -> FormMatrices {
    let mesh = build_mesh(interval, n).unwrap();
    let coeffs = family.sample(&mesh).unwrap();
    assemble_forms(&mesh, &coeffs, bc, MassTreatment::Lumped).unwrap()
}

/// Points left of both numerical ranges.
pub fn admissible_grid(direct: &CMatrix, t0: &CMatrix) -> Vec<C64> {
    let sigma = 1f64.max(safe_shift(direct)).max(safe_shift(t0));
    vec![c(-sigma, 0.0), c(-sigma, sigma), c(-sigma, -sigma), c(-2.0 * sigma, 0.5 * sigma), c(-4.0 * sigma, 0.0)]
}
