//! Explicit relative form-bound constants and checks of the bounds on discrete functions.

use thiserror::Error;

use crate::assembly::FormMatrices;
use crate::linalg::{CVector, C64};
use crate::mesh::{CoefficientSet, Mesh};

/// Points per decade of the logarithmic epsilon grid.
pub const GRID_PER_DECADE: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormBoundError {
    #[error("epsilon {eps} outside (0, {eps0})")]
    EpsOutOfRange { eps: f64, eps0: f64 },
    #[error("vector length {got} does not match {expected}")]
    Length { expected: usize, got: usize },
    #[error("parameter must be positive, got {0}")]
    NonPositive(f64),
    #[error("empty epsilon range after composition")]
    EmptyRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormBoundConstants {
    /// sup of `int |q|` over unit windows
    pub c_q: f64,
    /// sup of `int |r|^2` over unit windows
    pub c_r: f64,
    /// sup of `int |s|^2` over unit windows
    pub c_s: f64,
    pub lambda: f64,
    pub c_0: f64,
    pub eps_qrs: f64,
    pub m: f64,
    pub eps_0: f64,
    /// Set when the unit window does not fit in the domain and whole-domain integrals were used.
    pub window_covers_domain: bool,
}

impl FormBoundConstants {
    /// Derived constants from the three window norms and the ellipticity bound.
    ///
    /// A vanishing coefficient drops out of `eps_qrs`; if all vanish, `eps_0 = 1`.
    pub fn from_norms(c_q: f64, c_r: f64, c_s: f64, lambda: f64) -> Self {
        let c_0 = std::f64::consts::SQRT_2 * 1f64.max(c_r).max(c_s).max(std::f64::consts::SQRT_2 * c_q * c_q);
        let eps_qrs = [c_r.sqrt(), c_s.sqrt(), c_q]
            .into_iter()
            .filter(|v| *v > 0.0)
            .fold(f64::INFINITY, f64::min);
        let m = 128.0 * c_0 * c_0 * (1.0 / lambda + lambda.powi(-3));
        let eps_0 = 1f64.min(4.0 / lambda * eps_qrs);
        Self { c_q, c_r, c_s, lambda, c_0, eps_qrs, m, eps_0, window_covers_domain: false }
    }
}

/// Sup over unit windows starting at mesh nodes of the integrals of `|q|`, `|r|^2`, `|s|^2`.
pub fn locunif_norms(coeffs: &CoefficientSet, mesh: &Mesh) -> FormBoundConstants {
    let abs_q: Vec<f64> = coeffs.q.iter().map(|v| v.norm()).collect();
    let sq = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).collect::<Vec<f64>>();
    let (c_q, covers) = window_sup(&abs_q, mesh);
    let (c_r, _) = window_sup(&sq(&coeffs.r), mesh);
    let (c_s, _) = window_sup(&sq(&coeffs.s), mesh);
    let mut out = FormBoundConstants::from_norms(c_q, c_r, c_s, coeffs.lambda);
    out.window_covers_domain = covers;
    out
}

/// Returns the window supremum and whether the whole-domain fallback was taken.
fn window_sup(cell_values: &[f64], mesh: &Mesh) -> (f64, bool) {
    let h = mesh.h;
    let n = cell_values.len();
    if mesh.length() <= 1.0 + 1e-12 * mesh.length() {
        return (cell_values.iter().sum::<f64>() * h, true);
    }
    let mut best = 0.0f64;
    for start in 0..n {
        let x0 = mesh.nodes[start];
        if x0 + 1.0 > mesh.b() + 1e-12 {
            break;
        }
        let mut total = 0.0;
        let mut remaining = 1.0f64;
        let mut cell = start;
        while remaining > 1e-14 && cell < n {
            let take = remaining.min(h);
            total += cell_values[cell] * take;
            remaining -= take;
            cell += 1;
        }
        best = best.max(total);
    }
    (best, false)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginRow {
    pub eps: f64,
    pub j: usize,
    pub lhs: f64,
    pub bound: f64,
    pub slack: f64,
}

/// `|q_j(f,f)|` against `eps Re q_0(f,f) + M eps^{-3} |f|^2` for `j = 1, 2, 3`.
pub fn check_form_bound(
    f: &CVector,
    forms: &FormMatrices,
    constants: &FormBoundConstants,
    eps: f64,
) -> Result<Vec<MarginRow>, FormBoundError> {
    if !(eps > 0.0 && eps < constants.eps_0) {
        return Err(FormBoundError::EpsOutOfRange { eps, eps0: constants.eps_0 });
    }
    if f.len() != forms.n_dof() {
        return Err(FormBoundError::Length { expected: forms.n_dof(), got: f.len() });
    }
    let quad = |k: &crate::linalg::CMatrix| f.dotc(&(k * f));
    let norm_sq = quad(&forms.mass).re;
    let re_q0 = quad(&forms.k0).re;
    let bound = eps * re_q0 + constants.m * eps.powi(-3) * norm_sq;
    Ok([&forms.k1, &forms.k2, &forms.k3]
        .iter()
        .enumerate()
        .map(|(idx, k)| {
            let lhs = quad(k).norm();
            MarginRow { eps, j: idx + 1, lhs, bound, slack: bound - lhs }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrudingerReport {
    pub eps: f64,
    /// Slack of the pointwise inequality at each node.
    pub node_slack: Vec<f64>,
    pub weighted_lhs: f64,
    pub weighted_bound: f64,
    pub n_w: f64,
}

impl TrudingerReport {
    pub fn min_node_slack(&self) -> f64 {
        self.node_slack.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn weighted_slack(&self) -> f64 {
        self.weighted_bound - self.weighted_lhs
    }
}

/// Pointwise and weighted Sobolev-type inequalities for the piecewise-linear interpolant of `f`
/// (values at all mesh nodes) with a cellwise constant weight `w`. Integrals are exact.
pub fn check_trudinger(f: &CVector, w: &[C64], mesh: &Mesh, eps: f64) -> Result<TrudingerReport, FormBoundError> {
    if !(eps > 0.0) {
        return Err(FormBoundError::NonPositive(eps));
    }
    let n = mesh.n_cells();
    if f.len() != n + 1 {
        return Err(FormBoundError::Length { expected: n + 1, got: f.len() });
    }
    if w.len() != n {
        return Err(FormBoundError::Length { expected: n, got: w.len() });
    }
    let h = mesh.h;
    let cell_l2 = |e: usize| {
        let (a, b) = (f[e], f[e + 1]);
        h / 3.0 * (a.norm_sqr() + (a.conj() * b).re + b.norm_sqr())
    };
    let deriv_sq: f64 = (0..n).map(|e| (f[e + 1] - f[e]).norm_sqr() / h).sum();
    let l2_sq: f64 = (0..n).map(cell_l2).sum();
    let inv_len = 1.0 / mesh.length();
    let pointwise_bound = eps * deriv_sq + (inv_len + 1.0 / eps) * l2_sq;
    let node_slack = f.iter().map(|v| pointwise_bound - v.norm_sqr()).collect();
    let n_w: f64 = w.iter().map(|v| v.norm_sqr() * h).sum();
    let weighted_lhs: f64 = (0..n).map(|e| w[e].norm_sqr() * cell_l2(e)).sum();
    let weighted_bound = eps * n_w * deriv_sq + (inv_len + 1.0 / eps) * n_w * l2_sq;
    Ok(TrudingerReport { eps, node_slack, weighted_lhs, weighted_bound, n_w })
}

/// Function of epsilon tabulated on a logarithmic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTable {
    pub eps: Vec<f64>,
    pub eta: Vec<f64>,
}

impl EtaTable {
    /// Samples `f` on the grid points `10^(k/32)` inside `[lo, hi]`.
    pub fn from_fn(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Self {
        let eps = log_grid(lo, hi);
        let eta = eps.iter().map(|&e| f(e)).collect();
        Self { eps, eta }
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        Some((*self.eps.first()?, *self.eps.last()?))
    }

    /// Log-log interpolation (linear where values are not positive); `None` outside the table.
    pub fn eval(&self, e: f64) -> Option<f64> {
        let (lo, hi) = self.range()?;
        let tol = 1e-12 * e;
        if e < lo - tol || e > hi + tol {
            return None;
        }
        let e = e.clamp(lo, hi);
        let k = self.eps.partition_point(|&x| x <= e).clamp(1, self.eps.len().max(2) - 1);
        if self.eps.len() == 1 {
            return Some(self.eta[0]);
        }
        let (x0, x1, y0, y1) = (self.eps[k - 1], self.eps[k], self.eta[k - 1], self.eta[k]);
        let t = (e.ln() - x0.ln()) / (x1.ln() - x0.ln());
        if y0 > 0.0 && y1 > 0.0 {
            Some((y0.ln() + t * (y1.ln() - y0.ln())).exp())
        } else {
            Some(y0 + t * (y1 - y0))
        }
    }
}

/// Grid points `10^(k/32)` in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64) -> Vec<f64> {
    let per = GRID_PER_DECADE as f64;
    let k0 = (lo.log10() * per - 1e-9).ceil() as i64;
    let k1 = (hi.log10() * per + 1e-9).floor() as i64;
    (k0..=k1).map(|k| 10f64.powf(k as f64 / per)).collect()
}

/// Sum of two infinitesimally bounded perturbations: `eps0 = 2 min{1/2, eps1, eps2}` and
/// `eta0(eps) = eta1(eps/2) + eta2(eps/2)`.
pub fn compose_infinitesimal(
    eps1: f64,
    eps2: f64,
    eta1: &EtaTable,
    eta2: &EtaTable,
) -> Result<(f64, EtaTable), FormBoundError> {
    for v in [eps1, eps2] {
        if !(v > 0.0) {
            return Err(FormBoundError::NonPositive(v));
        }
    }
    let eps0 = 2.0 * 0.5f64.min(eps1).min(eps2);
    let (lo1, hi1) = eta1.range().ok_or(FormBoundError::EmptyRange)?;
    let (lo2, hi2) = eta2.range().ok_or(FormBoundError::EmptyRange)?;
    let lo = 2.0 * lo1.max(lo2);
    let hi = eps0.min(2.0 * hi1.min(hi2));
    if !(lo <= hi) {
        return Err(FormBoundError::EmptyRange);
    }
    let eps: Vec<f64> = log_grid(lo, hi).into_iter().filter(|&e| e < eps0 || e == hi).collect();
    let mut table = EtaTable { eps: Vec::new(), eta: Vec::new() };
    for e in eps {
        if let (Some(a), Some(b)) = (eta1.eval(e / 2.0), eta2.eval(e / 2.0)) {
            table.eps.push(e);
            table.eta.push(a + b);
        }
    }
    if table.eps.is_empty() {
        return Err(FormBoundError::EmptyRange);
    }
    Ok((eps0, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::mesh::{build_mesh, CoefficientFamily, IntervalSpec};

    #[test]
    fn unit_constants() {
        let k = FormBoundConstants::from_norms(1.0, 1.0, 1.0, 1.0);
        assert!((k.c_0 - 2.0).abs() < 1e-14);
        assert!((k.m - 1024.0).abs() < 1e-10);
        assert_eq!(k.eps_qrs, 1.0);
        assert_eq!(k.eps_0, 1.0);
    }

    #[test]
    fn constant_potential_window() {
        let mesh = build_mesh(IntervalSpec::full_line(5.0), 200).unwrap();
        let coeffs = CoefficientFamily::Constant { p: 1.0, q: 1.0, r: 0.0, s: 0.0 }.sample(&mesh).unwrap();
        let k = locunif_norms(&coeffs, &mesh);
        assert!((k.c_q - 1.0).abs() < 1e-12);
        assert!(!k.window_covers_domain);
        assert_eq!(k.c_r, 0.0);
        assert!(k.eps_qrs == 1.0);
    }

    #[test]
    fn short_domain_falls_back() {
        let mesh = build_mesh(IntervalSpec::finite(0.0, 1.0), 100).unwrap();
        let zero = c(0.0, 0.0);
        let coeffs =
            CoefficientSet::from_fns(&mesh, |_| c(1.0, 0.0), |_| zero, |x| c(x, 0.0), |_| zero).unwrap();
        let k = locunif_norms(&coeffs, &mesh);
        assert!(k.window_covers_domain);
        // midpoint samples: 1/3 - h^2/12
        assert!((k.c_r - (1.0 / 3.0 - mesh.h * mesh.h / 12.0)).abs() < 1e-14);
    }

    #[test]
    fn trudinger_examples() {
        let mesh = build_mesh(IntervalSpec::finite(0.0, 1.0), 10).unwrap();
        let ones = CVector::from_element(11, c(1.0, 0.0));
        let w = vec![c(1.0, 0.0); 10];
        let r = check_trudinger(&ones, &w, &mesh, 0.3).unwrap();
        assert!((r.min_node_slack() - 1.0 / 0.3).abs() < 1e-12);
        let line = CVector::from_fn(11, |i, _| c(mesh.nodes[i], 0.0));
        let r = check_trudinger(&line, &w, &mesh, 1.0).unwrap();
        assert!((r.min_node_slack() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn composition_examples() {
        let inv = |e: f64| 1.0 / e;
        let t1 = EtaTable::from_fn(1e-4, 1.0, inv);
        let (eps0, t0) = compose_infinitesimal(0.5, 0.5, &t1, &t1).unwrap();
        assert_eq!(eps0, 1.0);
        for (e, v) in t0.eps.iter().zip(&t0.eta) {
            assert!((v - 4.0 / e).abs() < 1e-9 * v, "{e}");
        }
        let (eps0, _) = compose_infinitesimal(2.0, 3.0, &t1, &t1).unwrap();
        assert_eq!(eps0, 1.0);
        let k = EtaTable::from_fn(1e-3, 1.0, |_| 2.5);
        let (_, t0) = compose_infinitesimal(0.5, 0.5, &k, &k).unwrap();
        assert!(t0.eta.iter().all(|v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn grid_density() {
        let g = log_grid(1e-2, 1.0);
        assert_eq!(g.len(), 2 * GRID_PER_DECADE + 1);
    }
}
