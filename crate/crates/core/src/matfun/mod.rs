//! Matrix functions: resolvents, principal square roots, fractional powers and the
//! trace/log-determinant identity.

mod frac;
pub mod quadrature;
mod sqrt;
mod trace;

use thiserror::Error;

use crate::linalg::{hermitian_eigen, hermitian_part, shifted, CMatrix, Factorized, LinalgError, C64};

pub use frac::{check_power_laws, frac_power, frac_power_quad, PowerLawReport};
pub use quadrature::{gauss_legendre, QuadratureSpec};
pub use sqrt::{principal_sqrt, sqrt_db, sqrt_db_with_stats, SqrtStats};
pub use trace::{trace_det_check, TraceDetReport};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatfunError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("exponent {0} outside (0, 1)")]
    BadExponent(f64),
    #[error("quadrature needs at least 8 nodes and 2 per panel (got {n_nodes} nodes, {panels} panels)")]
    TooFewNodes { n_nodes: usize, panels: usize },
    #[error("eigenvalue {0} lies on the branch cut (-inf, 0]")]
    BranchCut(C64),
    #[error("square-root iteration stalled after {iterations} steps (|M - I| = {distance:.3e})")]
    NotConverged { iterations: usize, distance: f64 },
    #[error("square root residual {residual:.3e} exceeds tolerance")]
    Inaccurate { residual: f64 },
    #[error("branch crossing near z = {z}: eigenvalue {eigenvalue} within {distance:.3e} of the cut")]
    BranchCrossing { z: f64, eigenvalue: C64, distance: f64 },
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
}

/// `(H - z)^{-1}`.
pub fn resolvent(h: &CMatrix, z: C64) -> Result<CMatrix, MatfunError> {
    Ok(Factorized::new(shifted(h, z))?.inverse())
}

/// Lowest point of the numerical range on the real axis: `min eig((H + H*)/2)`.
pub fn numerical_range_vertex(h: &CMatrix) -> f64 {
    hermitian_eigen(&hermitian_part(h)).0.first().copied().unwrap_or(0.0)
}

/// Shift `E` such that the numerical range of `H + E` lies in `Re >= 1`.
pub fn safe_shift(h: &CMatrix) -> f64 {
    1.0 - numerical_range_vertex(h)
}

/// Fails if some eigenvalue of `h` lies on `(-inf, 0]` (relative tolerance `tol`).
/// Matrices with positive definite Hermitian part skip the eigenvalue computation.
pub fn check_off_cut(h: &CMatrix, tol: f64) -> Result<(), MatfunError> {
    let scale = h.norm().max(f64::MIN_POSITIVE);
    if numerical_range_vertex(h) > tol * scale {
        return Ok(());
    }
    for ev in crate::linalg::eigenvalues(h)? {
        if ev.re <= tol * scale && ev.im.abs() <= tol * scale {
            return Err(MatfunError::BranchCut(ev));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, diag, identity};

    #[test]
    fn resolvent_of_diagonal() {
        let h = diag(&[c(2.0, 0.0), c(3.0, 1.0)]);
        let r = resolvent(&h, c(1.0, 0.0)).unwrap();
        assert!((r[(0, 0)] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((r[(1, 1)] - c(2.0, 1.0).inv()).norm() < 1e-15);
        assert!(resolvent(&h, c(2.0, 0.0)).is_err());
    }

    #[test]
    fn cut_detection() {
        assert!(check_off_cut(&identity(3), 1e-12).is_ok());
        let bad = diag(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        assert!(matches!(check_off_cut(&bad, 1e-12), Err(MatfunError::BranchCut(_))));
        let off = diag(&[c(-1.0, 1.0), c(2.0, 0.0)]);
        assert!(check_off_cut(&off, 1e-12).is_ok());
    }
}
