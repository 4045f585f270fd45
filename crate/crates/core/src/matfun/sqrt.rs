use super::{check_off_cut, MatfunError};
use crate::linalg::{c, ensure_square, hermitian_power, identity, is_hermitian, CMatrix, Factorized};

const MAX_ITERATIONS: usize = 100;
const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtStats {
    pub iterations: usize,
    /// `|Y^2 - X|_F / |X|_F`
    pub residual: f64,
}

/// Principal square root by the scaled product form of the Denman-Beavers iteration.
pub fn sqrt_db(x: &CMatrix) -> Result<CMatrix, MatfunError> {
    sqrt_db_with_stats(x).map(|(y, _)| y)
}

pub fn sqrt_db_with_stats(x: &CMatrix) -> Result<(CMatrix, SqrtStats), MatfunError> {
    let n = ensure_square(x)?;
    if n == 0 {
        return Ok((x.clone(), SqrtStats { iterations: 0, residual: 0.0 }));
    }
    check_off_cut(x, 1e-13)?;
    let eye = identity(n);
    let root_n = (n as f64).sqrt();
    let mut m = x.clone();
    let mut y = x.clone();
    let mut distance = (&m - &eye).norm() / root_n;
    let mut iterations = 0;
    while distance > 1e-15 {
        if iterations == MAX_ITERATIONS {
            return Err(MatfunError::NotConverged { iterations, distance });
        }
        iterations += 1;
        let factor = Factorized::new(m.clone())?;
        let m_inv = factor.inverse();
        // determinant scaling only while far from convergence
        let mu = if distance > 1e-2 { (-factor.log_det().re / (2.0 * n as f64)).exp() } else { 1.0 };
        let mu2 = mu * mu;
        y = &y * (&eye + &m_inv * c(1.0 / mu2, 0.0)) * c(0.5 * mu, 0.0);
        m = (&eye + (&m * c(mu2, 0.0) + &m_inv * c(1.0 / mu2, 0.0)) * c(0.5, 0.0)) * c(0.5, 0.0);
        let next = (&m - &eye).norm() / root_n;
        // roundoff floor: stop once quadratic convergence stalls
        if next < 1e-8 && next > 0.5 * distance {
            break;
        }
        distance = next;
    }
    let residual = (&y * &y - x).norm() / x.norm();
    if !(residual <= RESIDUAL_TOL) {
        return Err(MatfunError::Inaccurate { residual });
    }
    Ok((y, SqrtStats { iterations, residual }))
}

/// Principal square root; Hermitian positive definite input goes through the eigendecomposition.
pub fn principal_sqrt(x: &CMatrix) -> Result<CMatrix, MatfunError> {
    if is_hermitian(x, 1e-15) {
        if let Ok(root) = hermitian_power(x, 0.5) {
            return Ok(root);
        }
    }
    sqrt_db(x)
}
