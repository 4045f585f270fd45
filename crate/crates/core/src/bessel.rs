//! Modified Bessel function `K_0` by two independent methods, and the half-line transform
//! `int_0^inf t^{-1/2} g(t + E) dt` shared by the kernel integrals.

use thiserror::Error;

use crate::linalg::{c, C64};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Trapezoid step in the `cosh` variable.
pub const TRANSFORM_STEP: f64 = 1.0 / 32.0;
/// Upper cutoff in the `cosh` variable.
pub const TRANSFORM_U_MAX: f64 = 45.0;
const TRANSFORM_REL_TOL: f64 = 1e-17;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesselError {
    #[error("argument {0} must be positive and finite")]
    BadArgument(f64),
    #[error("shift {0} must be positive")]
    BadShift(f64),
    #[error("integrand still {last:e} relative to the sum at the cutoff")]
    NotConverged { last: f64 },
}

fn check_arg(x: f64) -> Result<(), BesselError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(BesselError::BadArgument(x))
    }
}

/// `K_0(x) = int_0^inf exp(-x cosh u) du` by the trapezoid rule, which converges geometrically
/// for this analytic, doubly-exponentially decaying integrand.
pub fn k0_integral(x: f64) -> Result<f64, BesselError> {
    check_arg(x)?;
    let step = TRANSFORM_STEP;
    let mut sum = 0.5 * (-x).exp();
    let n_max = (TRANSFORM_U_MAX / step) as usize;
    for k in 1..=n_max {
        let term = (-x * (k as f64 * step).cosh()).exp();
        sum += term;
        // an underflowed sum stays zero, which is the representable value
        if term < TRANSFORM_REL_TOL * sum || term == 0.0 {
            return Ok(step * sum);
        }
    }
    Err(BesselError::NotConverged { last: f64::NAN })
}

/// Ascending series, accurate for `x <= 2`.
pub fn k0_series(x: f64) -> Result<f64, BesselError> {
    check_arg(x)?;
    let y = 0.25 * x * x;
    let lead = -((0.5 * x).ln() + EULER_GAMMA);
    let (mut i0, mut rest) = (1.0, 0.0);
    let (mut term, mut harmonic) = (1.0, 0.0);
    for k in 1..200 {
        let kf = k as f64;
        term *= y / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        rest += term * harmonic;
        if term * harmonic < 1e-18 * rest.abs().max(i0) {
            break;
        }
    }
    Ok(lead * i0 + rest)
}

/// Steed's continued fraction (Temme's normalization), accurate for `x >= 2`.
pub fn k0_continued_fraction(x: f64) -> Result<f64, BesselError> {
    check_arg(x)?;
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let (mut q1, mut q2) = (0.0, 1.0);
    let mut q = a1;
    let mut cc = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 1..10_000 {
        let fi = i as f64;
        a -= 2.0 * fi;
        cc = -a * cc / (fi + 1.0);
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += cc * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    Ok((std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s)
}

/// Reference `K_0`: series below 2, continued fraction above.
pub fn k0_reference(x: f64) -> Result<f64, BesselError> {
    if x <= 2.0 {
        k0_series(x)
    } else {
        k0_continued_fraction(x)
    }
}

/// `int_0^inf t^{-1/2} g(t + e) dt`, computed as `2 sqrt(e) int_0^inf cosh(u) g(e cosh^2 u) du`.
///
/// `g` must decay at least like `tau^{-1/2 - delta}`.
pub fn half_line_transform(e: f64, mut g: impl FnMut(f64) -> C64) -> Result<C64, BesselError> {
    if !(e > 0.0 && e.is_finite()) {
        return Err(BesselError::BadShift(e));
    }
    let step = TRANSFORM_STEP;
    let mut sum = g(e) * 0.5;
    let n_max = (TRANSFORM_U_MAX / step) as usize;
    let mut last = f64::INFINITY;
    for k in 1..=n_max {
        let u = k as f64 * step;
        let ch = u.cosh();
        let term = g(e * ch * ch) * ch;
        sum += term;
        last = term.norm();
        if u >= 1.0 && last <= TRANSFORM_REL_TOL * sum.norm() {
            return Ok(sum * c(2.0 * e.sqrt() * step, 0.0));
        }
        if sum.norm() == 0.0 && last == 0.0 && u >= 1.0 {
            return Ok(c(0.0, 0.0));
        }
    }
    Err(BesselError::NotConverged { last: last / sum.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        // reference values from scipy.special.k0
        let table = [(0.1, 2.427_069_024_702_016), (1.0, 0.421_024_438_240_708_3), (5.0, 3.691_098_334_042_594e-3)];
        for (x, k0) in table {
            for f in [k0_integral, k0_reference] {
                let v = f(x).unwrap();
                assert!((v - k0).abs() <= 1e-12 * k0, "x={x}: {v} vs {k0}");
            }
        }
    }

    #[test]
    fn methods_overlap_at_two() {
        let a = k0_series(2.0).unwrap();
        let b = k0_continued_fraction(2.0).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn transform_of_power() {
        // int_0^inf t^{-1/2} (t + 1)^{-1} dt = pi
        let v = half_line_transform(1.0, |tau| c(1.0 / tau, 0.0)).unwrap();
        assert!((v.re - std::f64::consts::PI).abs() < 1e-12, "{v}");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(k0_integral(0.0).is_err());
        assert!(k0_series(-1.0).is_err());
        assert!(half_line_transform(0.0, |_| c(1.0, 0.0)).is_err());
    }
}
