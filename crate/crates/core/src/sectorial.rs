//! Numerical ranges, sector fits, m-accretivity and resolvent-growth constants.

use std::f64::consts::PI;

use thiserror::Error;

use crate::linalg::{
    c, eigenvalues, ensure_square, hermitian_eigen, hermitian_part, inverse, power_norm, random_unit_vector,
    seeded_rng, shifted, CMatrix, LinalgError, C64,
};

/// Angles of the support-function sweep.
pub const SWEEP_ANGLES: usize = 64;
/// Power-iteration budget for resolvent norm estimates.
pub const POWER_STEPS: usize = 50;
pub const POWER_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SectorialError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("shift {0} must have positive real part")]
    NonPositiveShift(C64),
    #[error("eigenvalue {0} lies on (-inf, 0]")]
    SpectrumOnCut(C64),
    #[error("sector angle {omega} does not exceed the spectral angle {spectral}")]
    AngleTooSmall { omega: f64, spectral: f64 },
    #[error("empty matrix")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeReport {
    /// Support points `(phi, w)` of the boundary sweep.
    pub boundary: Vec<(f64, C64)>,
    /// Rayleigh quotients of random unit vectors.
    pub samples: Vec<C64>,
    pub vertex: f64,
    pub half_angle: f64,
    /// Numerical range inside the open right half-plane.
    pub accretive: bool,
}

impl RangeReport {
    pub fn points(&self) -> impl Iterator<Item = C64> + '_ {
        self.boundary.iter().map(|b| b.1).chain(self.samples.iter().copied())
    }
}

fn rayleigh(h: &CMatrix, v: &crate::linalg::CVector) -> C64 {
    v.dotc(&(h * v)) / v.dotc(v)
}

/// Samples the numerical range and fits a sector `|arg(w - vertex)| <= half_angle` containing it.
///
/// The vertex minimizes the area of the sector cut off at the rightmost sampled real part, over
/// vertices left of the range; ties go to the rightmost vertex.
pub fn numerical_range_hull(h: &CMatrix, n_random: usize, seed: u64) -> Result<RangeReport, SectorialError> {
    let n = ensure_square(h)?;
    if n == 0 {
        return Err(SectorialError::Empty);
    }
    let mut boundary = Vec::with_capacity(SWEEP_ANGLES);
    for k in 0..SWEEP_ANGLES {
        let phi = 2.0 * PI * k as f64 / SWEEP_ANGLES as f64;
        // the top eigenvector of Re(e^{-i phi} H) is the support point in direction e^{i phi}
        let rotated = h * C64::from_polar(1.0, -phi);
        let (_, vecs) = hermitian_eigen(&hermitian_part(&rotated));
        let v = vecs.column(n - 1).into_owned();
        boundary.push((phi, rayleigh(h, &v)));
    }
    let mut rng = seeded_rng(seed);
    let samples: Vec<C64> = (0..n_random).map(|_| rayleigh(h, &random_unit_vector(n, &mut rng))).collect();
    let points: Vec<C64> = boundary.iter().map(|b| b.1).chain(samples.iter().copied()).collect();
    let (vertex, half_angle) = fit_sector(&points);
    let scale = h.norm().max(1.0);
    let accretive = hermitian_eigen(&hermitian_part(h)).0[0] > 1e-12 * scale;
    Ok(RangeReport { boundary, samples, vertex, half_angle, accretive })
}

/// Largest `|arg(w - vertex)|` over `points`; `vertex` must not exceed any real part.
pub fn sector_angle(points: &[C64], vertex: f64) -> f64 {
    points
        .iter()
        .map(|w| {
            let d = w - c(vertex, 0.0);
            if d.norm() == 0.0 {
                0.0
            } else {
                d.im.abs().atan2(d.re)
            }
        })
        .fold(0.0, f64::max)
}

fn fit_sector(points: &[C64]) -> (f64, f64) {
    let min_re = points.iter().map(|w| w.re).fold(f64::INFINITY, f64::min);
    let max_re = points.iter().map(|w| w.re).fold(f64::NEG_INFINITY, f64::max);
    let spread = points.iter().map(|w| (w - points[0]).norm()).fold(0.0, f64::max);
    let span = (max_re - min_re).max(spread);
    if span == 0.0 {
        return (min_re, sector_angle(points, min_re));
    }
    const STEPS: usize = 1024;
    let area = |g: f64| {
        let theta = sector_angle(points, g);
        if theta >= PI / 2.0 {
            f64::INFINITY
        } else {
            (max_re - g).powi(2) * theta.tan()
        }
    };
    let mut best = (f64::INFINITY, min_re);
    // scan right to left so ties keep the rightmost vertex
    for k in 0..=STEPS {
        let g = min_re - 2.0 * span * k as f64 / STEPS as f64;
        let a = area(g);
        if a < best.0 * (1.0 - 1e-12) {
            best = (a, g);
        }
    }
    if !best.0.is_finite() {
        return (min_re, sector_angle(points, min_re));
    }
    (best.1, sector_angle(points, best.1))
}

/// Exact half-angle of the smallest sector with the given vertex containing the numerical range,
/// by bisection on the supporting half-planes. `None` if the range leaves the half-plane
/// `Re w >= vertex`.
pub fn sector_angle_at(h: &CMatrix, vertex: f64) -> Option<f64> {
    let shifted_h = shifted(h, c(vertex, 0.0));
    let tol = 1e-13 * h.norm().max(1.0);
    let contained = |beta: f64| {
        [beta, -beta].iter().all(|&b| {
            let rotated = &shifted_h * C64::from_polar(1.0, b);
            hermitian_eigen(&hermitian_part(&rotated)).0[0] >= -tol
        })
    };
    if !contained(0.0) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    if contained(hi) {
        return Some(0.0);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if contained(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(PI / 2.0 - lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccretiveReport {
    /// `(zeta, |(H + zeta)^{-1}| Re zeta)`
    pub rows: Vec<(C64, f64)>,
    pub worst_ratio: f64,
    pub passed: bool,
}

/// Checks `|(H + zeta)^{-1}| <= 1 / Re zeta` on a grid of shifts with positive real part.
pub fn check_m_accretive(h: &CMatrix, zetas: &[C64]) -> Result<AccretiveReport, SectorialError> {
    ensure_square(h)?;
    let mut rows = Vec::with_capacity(zetas.len());
    for (k, &zeta) in zetas.iter().enumerate() {
        if !(zeta.re > 0.0) {
            return Err(SectorialError::NonPositiveShift(zeta));
        }
        let res = inverse(&shifted(h, -zeta))?;
        let norm = power_norm(&res, POWER_STEPS, POWER_TOL, k as u64);
        rows.push((zeta, norm * zeta.re));
    }
    let worst_ratio = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(AccretiveReport { rows, worst_ratio, passed: worst_ratio <= 1.0 + POWER_TOL })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectorDiagnostics {
    /// `(t, (1 + t) |(H + t)^{-1}|)`
    pub rows: Vec<(f64, f64)>,
    /// sup over the t grid
    pub m_positive: f64,
    /// sup of `|z (H - z)^{-1}|` over samples outside the sector of half-angle `omega`
    pub m_angle: f64,
    pub spectral_angle: f64,
}

pub fn sector_diagnostics(
    h: &CMatrix,
    t_grid: &[f64],
    omega: f64,
    z_samples: &[C64],
) -> Result<SectorDiagnostics, SectorialError> {
    let scale = h.norm().max(f64::MIN_POSITIVE);
    let spectrum = eigenvalues(h)?;
    let mut spectral_angle = 0.0f64;
    for ev in &spectrum {
        if ev.re <= 1e-13 * scale && ev.im.abs() <= 1e-13 * scale {
            return Err(SectorialError::SpectrumOnCut(*ev));
        }
        spectral_angle = spectral_angle.max(ev.arg().abs());
    }
    if !(omega > spectral_angle && omega < PI) {
        return Err(SectorialError::AngleTooSmall { omega, spectral: spectral_angle });
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    for (k, &t) in t_grid.iter().enumerate() {
        let res = inverse(&shifted(h, c(-t, 0.0)))?;
        rows.push((t, (1.0 + t) * power_norm(&res, POWER_STEPS, POWER_TOL, k as u64)));
    }
    let m_positive = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut m_angle = 0.0f64;
    for (k, &z) in z_samples.iter().enumerate() {
        if z.norm() == 0.0 || z.arg().abs() <= omega {
            continue;
        }
        let res = inverse(&shifted(h, z))?;
        m_angle = m_angle.max(z.norm() * power_norm(&res, POWER_STEPS, POWER_TOL, k as u64));
    }
    Ok(SectorDiagnostics { rows, m_positive, m_angle, spectral_angle })
}
