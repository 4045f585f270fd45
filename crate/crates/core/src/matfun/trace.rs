use std::f64::consts::PI;

use super::{sqrt_db, MatfunError};
use crate::linalg::{c, eigenvalues, ensure_square, shifted, CMatrix, Factorized, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceDetReport {
    /// Central difference of `-ln det((A-z)^{1/2} (A0-z)^{-1} (A-z)^{1/2})`.
    pub lhs: C64,
    /// `tr((A-z)^{-1} - (A0-z)^{-1})`
    pub rhs: C64,
    pub residual: f64,
}

/// Compares the logarithmic derivative of the perturbation determinant with the trace of the
/// resolvent difference at a real `z` left of both spectra.
pub fn trace_det_check(a: &CMatrix, a0: &CMatrix, z: f64, step: f64) -> Result<TraceDetReport, MatfunError> {
    if !(step > 0.0) {
        return Err(MatfunError::BadStep(step));
    }
    ensure_square(a)?;
    ensure_square(a0)?;
    for zeta in [z - step, z + step] {
        guard_branch(a, zeta, step)?;
        guard_branch(a0, zeta, step)?;
    }
    let plus = log_det_ratio(a, a0, z + step)?;
    let minus = log_det_ratio(a, a0, z - step)?;
    let mut diff = plus - minus;
    // unwrap the principal logarithm
    diff.im -= 2.0 * PI * (diff.im / (2.0 * PI)).round();
    let lhs = -diff / (2.0 * step);
    let zc = c(z, 0.0);
    let ra = Factorized::new(shifted(a, zc))?.inverse();
    let ra0 = Factorized::new(shifted(a0, zc))?.inverse();
    let rhs = (ra - ra0).trace();
    Ok(TraceDetReport { lhs, rhs, residual: (lhs - rhs).norm() })
}

fn log_det_ratio(a: &CMatrix, a0: &CMatrix, z: f64) -> Result<C64, MatfunError> {
    let zc = c(z, 0.0);
    let root = sqrt_db(&shifted(a, zc))?;
    let middle = Factorized::new(shifted(a0, zc))?.inverse();
    Ok(Factorized::new(&root * middle * &root)?.log_det())
}

fn guard_branch(m: &CMatrix, z: f64, step: f64) -> Result<(), MatfunError> {
    let margin = 10.0 * step;
    for ev in eigenvalues(&shifted(m, c(z, 0.0)))? {
        let distance = if ev.re <= 0.0 { ev.im.abs() } else { ev.norm() };
        if distance <= margin {
            return Err(MatfunError::BranchCrossing { z, eigenvalue: ev, distance });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag;

    #[test]
    fn diagonal_rank_one_example() {
        let a0 = diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let a = diag(&[c(1.1, 0.0), c(2.0, 0.0)]);
        let report = trace_det_check(&a, &a0, -1.0, 1e-5).unwrap();
        assert!(report.residual <= 1e-6, "{report:?}");
        assert!((report.rhs - c(1.0 / 2.1 - 0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn crossing_is_reported() {
        let a0 = diag(&[c(1.0, 0.0), c(2.0, 0.0)]);
        let a = diag(&[c(0.5, 0.0), c(2.0, 0.0)]);
        assert!(matches!(trace_det_check(&a, &a0, 0.5, 1e-3), Err(MatfunError::BranchCrossing { .. })));
    }
}
