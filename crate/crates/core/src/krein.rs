//! Closed-form objects for `-y''` on a finite interval with a Robin condition at the left end and
//! Dirichlet at the right: the solution `u2`, the Krein denominator, Green's functions, the
//! square-root kernel and its Bessel-type bound.

use thiserror::Error;

use crate::assembly::FormMatrices;
use crate::bessel::{half_line_transform, k0_integral, BesselError};
use crate::linalg::{c, CMatrix, C64};
use crate::mesh::{BoundaryCondition, Mesh};

/// `|d| / (1 + |u2'(a)|)` below this is treated as a shared eigenvalue.
pub const SHARED_SPECTRUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KreinError {
    #[error("z = {0} is a Dirichlet eigenvalue")]
    DirichletEigenvalue(C64),
    #[error("Krein denominator vanishes at z = {0}")]
    SharedSpectrum(C64),
    #[error("the left boundary condition must not be Dirichlet")]
    DirichletLeft,
    #[error("the reference resolvent must be Dirichlet at both ends")]
    ReferenceNotDirichlet,
    #[error("shift {e} is below the safe shift {safe}")]
    ShiftTooSmall { e: f64, safe: f64 },
    #[error("K0 argument {0} is not positive")]
    DegenerateArgument(f64),
    #[error(transparent)]
    Bessel(#[from] BesselError),
    #[error("kernel table does not cover node {0}")]
    MissingNode(usize),
}

/// `w = z^{1/2}` chosen with `Im w >= 0`; the formulas below only depend on `w^2` and parity.
fn upper_root(z: C64) -> C64 {
    let w = z.sqrt();
    if w.im < 0.0 {
        -w
    } else {
        w
    }
}

fn expi(w: C64, y: f64) -> C64 {
    (c(0.0, 1.0) * w * y).exp()
}

fn dirichlet_denominator(z: C64, w: C64, length: f64) -> Result<C64, KreinError> {
    // e^{2iwL} - 1, zero exactly at the Dirichlet eigenvalues
    let den = expi(w, 2.0 * length) - c(1.0, 0.0);
    if den.norm() < 1e-14 {
        return Err(KreinError::DirichletEigenvalue(z));
    }
    Ok(den)
}

/// `u2(z, x) = sin(w (b - x)) / sin(w (b - a))`, so `u2(a) = 1`, `u2(b) = 0`, `-u2'' = z u2`.
pub fn u2_closed_form(z: C64, x: f64, a: f64, b: f64) -> Result<C64, KreinError> {
    let w = upper_root(z);
    let (y, length) = (b - x, b - a);
    let den = dirichlet_denominator(z, w, length)?;
    Ok(expi(w, -(y - length)) * (expi(w, 2.0 * y) - c(1.0, 0.0)) / den)
}

/// `d/dx u2(z, x) = -w cos(w (b - x)) / sin(w (b - a))`.
pub fn u2_derivative(z: C64, x: f64, a: f64, b: f64) -> Result<C64, KreinError> {
    let w = upper_root(z);
    let (y, length) = (b - x, b - a);
    let den = dirichlet_denominator(z, w, length)?;
    Ok(-w * expi(w, -(y - length)) * c(0.0, 1.0) * (c(1.0, 0.0) + expi(w, 2.0 * y)) / den)
}

/// Krein denominator `cot(theta_a) + u2'(z, a)`.
pub fn d_theta(z: C64, theta_a: BoundaryCondition, a: f64, b: f64) -> Result<C64, KreinError> {
    let cot = theta_a.cot().ok_or(KreinError::DirichletLeft)?;
    let slope = u2_derivative(z, a, a, b)?;
    let d = cot + slope;
    if d.norm() <= SHARED_SPECTRUM_TOL * (1.0 + slope.norm()) {
        return Err(KreinError::SharedSpectrum(z));
    }
    Ok(d)
}

/// Dirichlet Green's function of `-d^2/dx^2 - z`: `sin(w(x< - a)) sin(w(b - x>)) / (w sin(w L))`.
pub fn dirichlet_green(z: C64, x: f64, xp: f64, a: f64, b: f64) -> Result<C64, KreinError> {
    let w = upper_root(z);
    let length = b - a;
    let den = dirichlet_denominator(z, w, length)?;
    let (lo, hi) = if x <= xp { (x, xp) } else { (xp, x) };
    let (left, right) = (lo - a, b - hi);
    let one = c(1.0, 0.0);
    Ok(expi(w, length - left - right) * (expi(w, 2.0 * left) - one) * (expi(w, 2.0 * right) - one)
        / (c(0.0, 2.0) * den * w))
}

/// Green's function of the Robin-Dirichlet realization from the rank-one formula.
pub fn krein_green(z: C64, theta_a: BoundaryCondition, x: f64, xp: f64, a: f64, b: f64) -> Result<C64, KreinError> {
    let d = d_theta(z, theta_a, a, b)?;
    Ok(dirichlet_green(z, x, xp, a, b)? - u2_closed_form(z, x, a, b)? * u2_closed_form(z, xp, a, b)? / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Green,
    SqrtKernel,
    TKernel,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Green => "green",
            KernelKind::SqrtKernel => "sqrt_kernel",
            KernelKind::TKernel => "t_kernel",
        }
    }
}

/// Two-point kernel sampled at mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub kind: KernelKind,
    /// Indices into the mesh nodes.
    pub node_index: Vec<usize>,
    pub nodes: Vec<f64>,
    pub values: CMatrix,
    /// `z` for Green's functions, `-E` for square-root kernels.
    pub spectral_parameter: C64,
    pub theta_a: BoundaryCondition,
    pub theta_b: BoundaryCondition,
}

impl KernelTable {
    /// Matrix `sqrt(m_i) K(x_i, x_j) sqrt(m_j)` on the degrees of freedom of `forms`, i.e. the
    /// integral operator in orthonormal coordinates.
    pub fn to_operator(&self, forms: &FormMatrices) -> Result<CMatrix, KreinError> {
        let weights = forms.mass_weights();
        let pos: Vec<usize> = forms
            .dof_nodes
            .iter()
            .map(|&node| self.node_index.iter().position(|&i| i == node).ok_or(KreinError::MissingNode(node)))
            .collect::<Result<_, _>>()?;
        let n = pos.len();
        Ok(CMatrix::from_fn(n, n, |i, j| self.values[(pos[i], pos[j])] * (weights[i] * weights[j]).sqrt()))
    }

    /// Inverse of [`KernelTable::to_operator`].
    pub fn from_operator(
        kind: KernelKind,
        op: &CMatrix,
        forms: &FormMatrices,
        spectral_parameter: C64,
    ) -> KernelTable {
        let weights = forms.mass_weights();
        let values = CMatrix::from_fn(op.nrows(), op.ncols(), |i, j| op[(i, j)] / (weights[i] * weights[j]).sqrt());
        KernelTable {
            kind,
            node_index: forms.dof_nodes.clone(),
            nodes: forms.dof_positions(),
            values,
            spectral_parameter,
            theta_a: forms.bc.left,
            theta_b: forms.bc.right,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |K - other| / max |other|`.
    pub fn rel_max_diff(&self, other: &KernelTable) -> f64 {
        let diff = (&self.values - &other.values).iter().map(|v| v.norm()).fold(0.0, f64::max);
        diff / other.max_abs()
    }
}

fn robin_rows(mesh: &Mesh) -> (Vec<usize>, Vec<f64>) {
    let idx: Vec<usize> = (0..mesh.n_cells()).collect();
    let x = idx.iter().map(|&i| mesh.nodes[i]).collect();
    (idx, x)
}

/// Robin-Dirichlet resolvent kernel at `z` built from the discrete Dirichlet resolvent `r_dir`
/// (orthonormal coordinates of `dirichlet`) plus the closed-form rank-one correction.
/// The table covers the nodes `a, ..., b - h`.
pub fn krein_resolvent(
    r_dir: &CMatrix,
    dirichlet: &FormMatrices,
    z: C64,
    theta_a: BoundaryCondition,
) -> Result<KernelTable, KreinError> {
    if !dirichlet.bc.left.is_dirichlet() || !dirichlet.bc.right.is_dirichlet() {
        return Err(KreinError::ReferenceNotDirichlet);
    }
    let (a, b) = (dirichlet.nodes[0], *dirichlet.nodes.last().expect("mesh has nodes"));
    let n_cells = dirichlet.nodes.len() - 1;
    let d = d_theta(z, theta_a, a, b)?;
    let dir_kernel = KernelTable::from_operator(KernelKind::Green, r_dir, dirichlet, z);
    let idx: Vec<usize> = (0..n_cells).collect();
    let x: Vec<f64> = idx.iter().map(|&i| dirichlet.nodes[i]).collect();
    let u: Vec<C64> = x.iter().map(|&xi| u2_closed_form(z, xi, a, b)).collect::<Result<_, _>>()?;
    // Dirichlet dofs are nodes 1..n-1, the table adds node 0 where the Dirichlet kernel is zero
    let values = CMatrix::from_fn(n_cells, n_cells, |i, j| {
        let g = if i > 0 && j > 0 { dir_kernel.values[(i - 1, j - 1)] } else { c(0.0, 0.0) };
        g - u[i] * u[j] / d
    });
    Ok(KernelTable {
        kind: KernelKind::Green,
        node_index: idx,
        nodes: x,
        values,
        spectral_parameter: z,
        theta_a,
        theta_b: BoundaryCondition::dirichlet(),
    })
}

/// Closed-form Green's function table (Robin-Dirichlet, or Dirichlet-Dirichlet when `theta_a`
/// is Dirichlet) at the nodes of `mesh` excluding `b`.
pub fn green_table(mesh: &Mesh, z: C64, theta_a: BoundaryCondition) -> Result<KernelTable, KreinError> {
    let (a, b) = (mesh.a(), mesh.b());
    let (idx, x) = robin_rows(mesh);
    let n = idx.len();
    let mut values = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = if theta_a.is_dirichlet() {
                dirichlet_green(z, x[i], x[j], a, b)?
            } else {
                krein_green(z, theta_a, x[i], x[j], a, b)?
            };
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(KernelTable {
        kind: KernelKind::Green,
        node_index: idx,
        nodes: x,
        values,
        spectral_parameter: z,
        theta_a,
        theta_b: BoundaryCondition::dirichlet(),
    })
}

/// Smallest shift above which the Krein denominator on the negative axis stays at least 1 in
/// modulus: `sqrt(tau) coth(sqrt(tau) L) >= sqrt(tau)` exceeds `Re cot + 1` there.
pub fn safe_kernel_shift(theta_a: BoundaryCondition) -> Result<f64, KreinError> {
    let cot = theta_a.cot().ok_or(KreinError::DirichletLeft)?;
    Ok((cot.re.max(0.0) + 1.0).powi(2))
}

fn avg_exp(s: f64, h: f64) -> f64 {
    // mean of exp(-s y) over y in [0, h/2]
    let x = 0.5 * s * h;
    if x < 1e-8 {
        1.0 - 0.5 * x
    } else {
        -(-x).exp_m1() / x
    }
}

/// `exp(-s y)` with `y` the separation, replaced by its dual-cell mean when `y` vanishes.
fn separation_factor(s: f64, y: f64, h: f64) -> f64 {
    if y <= 0.25 * h {
        avg_exp(s, h)
    } else {
        (-s * y).exp()
    }
}

/// `G_D(-tau, x, x')` with the diagonal regularized by the dual-cell mean.
fn dirichlet_green_negative(tau: f64, x: f64, xp: f64, a: f64, b: f64, h: f64) -> f64 {
    let s = tau.sqrt();
    let (lo, hi) = if x <= xp { (x, xp) } else { (xp, x) };
    let length = b - a;
    -(-2.0 * s * (lo - a)).exp_m1() * -(-2.0 * s * (b - hi)).exp_m1() * separation_factor(s, hi - lo, h)
        / (2.0 * s * -(-2.0 * s * length).exp_m1())
}

/// `u2(-tau, x) u2(-tau, x') / d(-tau)`, the rank-one part of the Robin resolvent at `-tau`.
pub fn t_kernel(tau: f64, x: f64, xp: f64, a: f64, b: f64, cot: C64, h: f64) -> C64 {
    let s = tau.sqrt();
    let length = b - a;
    let tail = -(-2.0 * s * length).exp_m1();
    // d(-tau) = cot - sqrt(tau) coth(sqrt(tau) L)
    let d = cot - c(s * (2.0 - tail) / tail, 0.0);
    let num = separation_factor(s, x + xp - 2.0 * a, h)
        * -(-2.0 * s * (b - x)).exp_m1()
        * -(-2.0 * s * (b - xp)).exp_m1();
    c(num / (tail * tail), 0.0) / d
}

/// Table of `(H_theta + E)^{-1/2}` for the Robin-Dirichlet realization, on all nodes of `mesh`:
/// `(1/pi) int t^{-1/2} [G_D(-(t+E)) - T(t+E)] dt`.
pub fn sqrt_kernel(mesh: &Mesh, e: f64, theta_a: BoundaryCondition) -> Result<KernelTable, KreinError> {
    let cot = theta_a.cot().ok_or(KreinError::DirichletLeft)?;
    let safe = safe_kernel_shift(theta_a)?;
    if !(e > safe) {
        return Err(KreinError::ShiftTooSmall { e, safe });
    }
    let (a, b, h) = (mesh.a(), mesh.b(), mesh.h);
    let x = mesh.nodes.clone();
    let n = x.len();
    let mut values = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = half_line_transform(e, |tau| {
                c(dirichlet_green_negative(tau, x[i], x[j], a, b, h), 0.0) - t_kernel(tau, x[i], x[j], a, b, cot, h)
            })? / std::f64::consts::PI;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(KernelTable {
        kind: KernelKind::SqrtKernel,
        node_index: (0..n).collect(),
        nodes: x,
        values,
        spectral_parameter: c(-e, 0.0),
        theta_a,
        theta_b: BoundaryCondition::dirichlet(),
    })
}

/// Separations `x + x' - 2a`, `2b + x - x' - 2a`, `2b + x' - x - 2a`, `4b - x - x' - 2a`.
pub fn image_separations(x: f64, xp: f64, a: f64, b: f64) -> [f64; 4] {
    [x + xp - 2.0 * a, 2.0 * b + x - xp - 2.0 * a, 2.0 * b + xp - x - 2.0 * a, 4.0 * b - x - xp - 2.0 * a]
}

/// Points per unit of `ln(tau)` in the bound-constant fit.
pub const FIT_POINTS_PER_UNIT: usize = 64;
/// Decades of `tau` above `E` scanned by the fit.
pub const FIT_DECADES: f64 = 12.0;

/// `sup |T(tau, x, x')| sqrt(tau) / sum_k exp(-sqrt(tau) y_k)` over `tau >= e` and the given
/// points, so that `|T(tau)| <= C tau^{-1/2} sum_k exp(-sqrt(tau) y_k)` on the scanned set.
pub fn fit_bound_constant(
    e: f64,
    points: &[(f64, f64)],
    theta_a: BoundaryCondition,
    a: f64,
    b: f64,
) -> Result<f64, KreinError> {
    let cot = theta_a.cot().ok_or(KreinError::DirichletLeft)?;
    let n_tau = (FIT_DECADES * std::f64::consts::LN_10 * FIT_POINTS_PER_UNIT as f64) as usize;
    let mut best = 0.0f64;
    for &(x, xp) in points {
        let ys = image_separations(x, xp, a, b);
        for k in 0..=n_tau {
            let tau = e * (k as f64 / FIT_POINTS_PER_UNIT as f64).exp();
            let s = tau.sqrt();
            let envelope: f64 = ys.iter().map(|y| (-s * y).exp()).sum();
            if envelope == 0.0 {
                continue;
            }
            // exact exponentials here, no cell averaging
            let t = t_kernel(tau, x, xp, a, b, cot, 0.0);
            best = best.max(t.norm() * s / envelope);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselBound {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// `|int t^{-1/2} T(t+E, x, x') dt|` against `2C sum_k K0(sqrt(E) y_k)`.
pub fn bessel_bound_check(
    e: f64,
    x: f64,
    xp: f64,
    theta_a: BoundaryCondition,
    a: f64,
    b: f64,
    constant: f64,
) -> Result<BesselBound, KreinError> {
    let cot = theta_a.cot().ok_or(KreinError::DirichletLeft)?;
    let ys = image_separations(x, xp, a, b);
    if let Some(&y) = ys.iter().find(|&&y| !(y > 0.0)) {
        return Err(KreinError::DegenerateArgument(y));
    }
    let lhs = half_line_transform(e, |tau| t_kernel(tau, x, xp, a, b, cot, 0.0))?.norm();
    let mut rhs = 0.0;
    for y in ys {
        rhs += k0_integral(e.sqrt() * y)?;
    }
    rhs *= 2.0 * constant;
    Ok(BesselBound { lhs, rhs, slack: rhs - lhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn u2_boundary_values_and_hyperbolic_form() {
        for z in [c(-1.0, 0.0), c(3.0, 2.0), c(-40.0, -1.0)] {
            assert!((u2_closed_form(z, 0.0, 0.0, 1.0).unwrap() - c(1.0, 0.0)).norm() < 1e-14);
            assert!(u2_closed_form(z, 1.0, 0.0, 1.0).unwrap().norm() < 1e-14);
        }
        let v = u2_closed_form(c(-1.0, 0.0), 0.5, 0.0, 1.0).unwrap();
        assert!((v - c(0.5f64.sinh() / 1.0f64.sinh(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn dirichlet_eigenvalue_rejected() {
        assert!(matches!(u2_closed_form(c(PI * PI, 0.0), 0.3, 0.0, 1.0), Err(KreinError::DirichletEigenvalue(_))));
    }

    #[test]
    fn neumann_denominator() {
        let e: f64 = 7.0;
        let d = d_theta(c(-e, 0.0), BoundaryCondition::neumann(), 0.0, 1.0).unwrap();
        assert!((d - c(-e.sqrt() / e.sqrt().tanh(), 0.0)).norm() < 1e-13);
        let d = d_theta(c(-e, 0.0), BoundaryCondition::robin(c(PI / 4.0, 0.0)).unwrap(), 0.0, 1.0).unwrap();
        assert!((d - c(1.0 - e.sqrt() / e.sqrt().tanh(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn t_kernel_matches_closed_form() {
        let theta = BoundaryCondition::robin(c(1.0, 0.5)).unwrap();
        let cot = theta.cot().unwrap();
        let (x, xp, tau) = (0.3, 0.7, 11.0);
        let z = c(-tau, 0.0);
        let direct = u2_closed_form(z, x, 0.0, 1.0).unwrap() * u2_closed_form(z, xp, 0.0, 1.0).unwrap()
            / d_theta(z, theta, 0.0, 1.0).unwrap();
        assert!((t_kernel(tau, x, xp, 0.0, 1.0, cot, 0.0) - direct).norm() < 1e-14);
        let g = dirichlet_green(z, x, xp, 0.0, 1.0).unwrap();
        assert!((c(dirichlet_green_negative(tau, x, xp, 0.0, 1.0, 0.0), 0.0) - g).norm() < 1e-14);
    }

    #[test]
    fn k0_argument_must_be_positive() {
        let theta = BoundaryCondition::neumann();
        assert!(matches!(
            bessel_bound_check(25.0, 0.0, 0.0, theta, 0.0, 1.0, 1.0),
            Err(KreinError::DegenerateArgument(_))
        ));
    }
}
