use sqrtdom::domain::*;
use sqrtdom::linalg::c;
use sqrtdom::mesh::{BoundaryCondition, BoundaryPair, CoefficientFamily, IntervalSpec};

fn complex_p() -> StudyProblem {
    StudyProblem::Assembled {
        family: CoefficientFamily::ComplexConstant { p: c(1.0, 0.5), q: c(0.0, 0.0), r: c(0.0, 0.0), s: c(0.0, 0.0) },
        interval: IntervalSpec::finite(0.0, 1.0),
        bc: BoundaryPair::dirichlet(),
    }
}

#[test]
fn baseline_kappa_is_one() {
    let problem = StudyProblem::Assembled {
        family: CoefficientFamily::Constant { p: 1.0, q: 0.0, r: 0.0, s: 0.0 },
        interval: IntervalSpec::finite(0.0, 1.0),
        bc: BoundaryPair::dirichlet(),
    };
    let report = refinement_study(&problem, &[32, 64, 128], 1.0, 0.5, 20, 1, GROWTH_THRESHOLD).unwrap();
    for row in &report.rows {
        assert!((row.kappa - 1.0).abs() < 1e-12, "{row:?}");
    }
    assert_eq!(report.verdict, Verdict::Bounded);
}

#[test]
fn extremes_dominate_samples() {
    let row = kappa_at(&complex_p(), 48, 1.0, 0.5, 200, 9).unwrap();
    assert!(row.kappa >= 1.0);
    assert!(row.min_ratio <= row.sample_min * (1.0 + 1e-12));
    assert!(row.max_ratio >= row.sample_max * (1.0 - 1e-12));
    let lions = lions_kappa(64, 10.0, 1.0, 0.5, 200, 9).unwrap();
    assert!(lions.min_ratio <= lions.sample_min * (1.0 + 1e-12));
    assert!(lions.max_ratio >= lions.sample_max * (1.0 - 1e-12));
}

#[test]
fn complex_robin_is_bounded() {
    let problem = StudyProblem::Assembled {
        family: CoefficientFamily::Constant { p: 1.0, q: 0.0, r: 0.0, s: 0.0 },
        interval: IntervalSpec::finite(0.0, 1.0),
        bc: BoundaryPair::new(BoundaryCondition::robin(c(1.0, 0.5)).unwrap(), BoundaryCondition::dirichlet()),
    };
    let report = refinement_study(&problem, &[32, 64, 128], 1.0, 0.5, 10, 1, GROWTH_THRESHOLD).unwrap();
    eprintln!("{:?}", report.rows.iter().map(|r| r.kappa).collect::<Vec<_>>());
    assert_eq!(report.verdict, Verdict::Bounded);
}

#[test]
fn lions_dichotomy() {
    let ns = [32, 64, 128, 256, 512, 1024];
    let half = refinement_study(&StudyProblem::Lions { length: 10.0 }, &ns, 1.0, 0.5, 10, 1, GROWTH_THRESHOLD).unwrap();
    let quarter =
        refinement_study(&StudyProblem::Lions { length: 10.0 }, &ns, 1.0, 0.25, 10, 1, GROWTH_THRESHOLD).unwrap();
    eprintln!("{:?}", half.rows.iter().map(|r| r.kappa).collect::<Vec<_>>());
    eprintln!("{:?}", quarter.rows.iter().map(|r| r.kappa).collect::<Vec<_>>());
    assert!(half.rows.windows(2).all(|w| w[1].kappa > w[0].kappa));
    assert!(half.growth > quarter.growth);
    assert_eq!(half.verdict, Verdict::Divergent);
    assert_eq!(quarter.verdict, Verdict::Bounded);
    assert!(quarter.rows.last().unwrap().kappa < LIONS_KAPPA_CEILING);
    assert!(half.rows.last().unwrap().kappa > LIONS_KAPPA_CEILING);
}
