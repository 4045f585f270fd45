//! Intervals, uniform meshes, sampled coefficients and boundary conditions.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::{c, C64};

/// Truncation length used for half-line and full-line problems when none is given.
pub const DEFAULT_TRUNCATION: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("a mesh needs at least 2 cells, got {0}")]
    TooFewCells(usize),
    #[error("empty or inverted interval [{0}, {1}]")]
    BadInterval(f64, f64),
    #[error("truncation length must be positive, got {0}")]
    BadTruncation(f64),
    #[error("coefficient p violates ellipticity at cell {cell}: Re p = {re_p}")]
    NotElliptic { cell: usize, re_p: f64 },
    #[error("coefficient {name} is not finite at cell {cell}")]
    NonFinite { name: &'static str, cell: usize },
    #[error("coefficient table needs at least two samples sorted by x")]
    BadTable,
    #[error("boundary angle {0} outside the strip 0 <= Re theta < pi")]
    BadAngle(C64),
    #[error("cannot parse boundary angle '{0}'")]
    BadAngleText(String),
    #[error("sample count mismatch: expected {expected}, got {got}")]
    SampleCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalSpec {
    Finite { a: f64, b: f64 },
    /// `[a, a + truncation]`
    HalfLine { a: f64, truncation: f64 },
    /// `[-truncation, truncation]`
    FullLine { truncation: f64 },
}

impl IntervalSpec {
    pub fn finite(a: f64, b: f64) -> Self {
        IntervalSpec::Finite { a, b }
    }

    pub fn half_line(a: f64, truncation: f64) -> Self {
        IntervalSpec::HalfLine { a, truncation }
    }

    pub fn full_line(truncation: f64) -> Self {
        IntervalSpec::FullLine { truncation }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            IntervalSpec::Finite { a, b } => (a, b),
            IntervalSpec::HalfLine { a, truncation } => (a, a + truncation),
            IntervalSpec::FullLine { truncation } => (-truncation, truncation),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            IntervalSpec::Finite { .. } => "finite",
            IntervalSpec::HalfLine { .. } => "half_line",
            IntervalSpec::FullLine { .. } => "full_line",
        }
    }

    fn validate(&self) -> Result<(), MeshError> {
        match *self {
            IntervalSpec::HalfLine { truncation, .. } | IntervalSpec::FullLine { truncation }
                if !(truncation > 0.0 && truncation.is_finite()) =>
            {
                Err(MeshError::BadTruncation(truncation))
            }
            _ => {
                let (a, b) = self.bounds();
                if a.is_finite() && b.is_finite() && a < b {
                    Ok(())
                } else {
                    Err(MeshError::BadInterval(a, b))
                }
            }
        }
    }
}

/// Uniform mesh with `n` cells and `n + 1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub interval: IntervalSpec,
    pub nodes: Vec<f64>,
    pub h: f64,
}

pub fn build_mesh(interval: IntervalSpec, n: usize) -> Result<Mesh, MeshError> {
    if n < 2 {
        return Err(MeshError::TooFewCells(n));
    }
    interval.validate()?;
    let (a, b) = interval.bounds();
    let h = (b - a) / n as f64;
    let mut nodes: Vec<f64> = (0..=n).map(|i| a + i as f64 * h).collect();
    nodes[n] = b;
    Ok(Mesh { interval, nodes, h })
}

impl Mesh {
    pub fn n_cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn a(&self) -> f64 {
        self.nodes[0]
    }

    pub fn b(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn length(&self) -> f64 {
        self.b() - self.a()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }
}

/// Coefficients sampled at cell midpoints, piecewise constant on the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub p: Vec<C64>,
    pub q: Vec<C64>,
    pub r: Vec<C64>,
    pub s: Vec<C64>,
    /// Lower bound for `Re p`.
    pub lambda: f64,
    /// Upper bound for `|p|`.
    pub big_lambda: f64,
}

impl CoefficientSet {
    pub fn from_fns(
        mesh: &Mesh,
        p: impl Fn(f64) -> C64,
        q: impl Fn(f64) -> C64,
        r: impl Fn(f64) -> C64,
        s: impl Fn(f64) -> C64,
    ) -> Result<Self, MeshError> {
        let mids = mesh.midpoints();
        Self::from_samples(
            mids.iter().map(|&x| p(x)).collect(),
            mids.iter().map(|&x| q(x)).collect(),
            mids.iter().map(|&x| r(x)).collect(),
            mids.iter().map(|&x| s(x)).collect(),
        )
    }

    pub fn from_samples(p: Vec<C64>, q: Vec<C64>, r: Vec<C64>, s: Vec<C64>) -> Result<Self, MeshError> {
        let n = p.len();
        for (name, v) in [("q", &q), ("r", &r), ("s", &s)] {
            if v.len() != n {
                return Err(MeshError::SampleCount { expected: n, got: v.len() });
            }
            if let Some(cell) = v.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
                return Err(MeshError::NonFinite { name, cell });
            }
        }
        let mut lambda = f64::INFINITY;
        let mut big_lambda = 0.0f64;
        for (cell, z) in p.iter().enumerate() {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(MeshError::NonFinite { name: "p", cell });
            }
            if !(z.re > 0.0) {
                return Err(MeshError::NotElliptic { cell, re_p: z.re });
            }
            lambda = lambda.min(z.re);
            big_lambda = big_lambda.max(z.norm());
        }
        Ok(Self { p, q, r, s, lambda, big_lambda })
    }

    /// `p = 1`, all lower-order terms zero.
    pub fn laplacian(mesh: &Mesh) -> Self {
        let one = c(1.0, 0.0);
        let zero = c(0.0, 0.0);
        Self::from_fns(mesh, |_| one, |_| zero, |_| zero, |_| zero).expect("constant coefficients are valid")
    }

    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    /// Same coefficients with the lower-order terms removed.
    pub fn principal_only(&self) -> Self {
        let zero = vec![c(0.0, 0.0); self.p.len()];
        Self { q: zero.clone(), r: zero.clone(), s: zero, ..self.clone() }
    }

    /// Stable FNV-1a hash of the sample bit patterns.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for v in [&self.p, &self.q, &self.r, &self.s] {
            for z in v.iter() {
                for bits in [z.re.to_bits(), z.im.to_bits()] {
                    for byte in bits.to_le_bytes() {
                        hash ^= byte as u64;
                        hash = hash.wrapping_mul(0x0100_0000_01b3);
                    }
                }
            }
        }
        hash
    }
}

/// Linear interpolation of a sorted `(x, value)` table at `x`, clamped at the ends.
pub fn interpolate_table(table: &[(f64, C64)], x: f64) -> Result<C64, MeshError> {
    if table.len() < 2 || table.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(MeshError::BadTable);
    }
    if x <= table[0].0 {
        return Ok(table[0].1);
    }
    if x >= table[table.len() - 1].0 {
        return Ok(table[table.len() - 1].1);
    }
    let k = table.partition_point(|e| e.0 <= x);
    let (x0, v0) = table[k - 1];
    let (x1, v1) = table[k];
    let t = (x - x0) / (x1 - x0);
    Ok(v0 + (v1 - v0) * t)
}

/// Named coefficient families used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientFamily {
    Constant { p: f64, q: f64, r: f64, s: f64 },
    ComplexConstant { p: C64, q: C64, r: C64, s: C64 },
    /// Periodic discontinuous ramps: rough but locally uniformly integrable.
    Sawtooth { amplitude: f64, period: f64 },
    /// `|x - center|^{-1/4}` profile, sampled by exact cell averages.
    Spike { amplitude: f64, center: f64 },
}

impl CoefficientFamily {
    pub fn name(&self) -> &'static str {
        match self {
            CoefficientFamily::Constant { .. } => "constant",
            CoefficientFamily::ComplexConstant { .. } => "complex_constant",
            CoefficientFamily::Sawtooth { .. } => "sawtooth",
            CoefficientFamily::Spike { .. } => "spike",
        }
    }

    pub fn sample(&self, mesh: &Mesh) -> Result<CoefficientSet, MeshError> {
        match *self {
            CoefficientFamily::Constant { p, q, r, s } => CoefficientSet::from_fns(
                mesh,
                |_| c(p, 0.0),
                |_| c(q, 0.0),
                |_| c(r, 0.0),
                |_| c(s, 0.0),
            ),
            CoefficientFamily::ComplexConstant { p, q, r, s } => {
                CoefficientSet::from_fns(mesh, |_| p, |_| q, |_| r, |_| s)
            }
            CoefficientFamily::Sawtooth { amplitude, period } => {
                let saw = move |x: f64| (x / period).rem_euclid(1.0);
                CoefficientSet::from_fns(
                    mesh,
                    move |x| c(1.0 + 0.5 * saw(x), 0.25 * saw(x)),
                    move |x| c(amplitude * (saw(x) - 0.5), amplitude * saw(x)),
                    move |x| c(amplitude * saw(x), 0.0),
                    move |x| c(0.0, amplitude * (1.0 - saw(x))),
                )
            }
            CoefficientFamily::Spike { amplitude, center } => {
                // exact cell averages, finite even when the center is a sample point
                let antiderivative = |x: f64| (x - center).signum() * (x - center).abs().powf(0.75) / 0.75;
                let spike: Vec<f64> =
                    mesh.nodes.windows(2).map(|w| (antiderivative(w[1]) - antiderivative(w[0])) / (w[1] - w[0])).collect();
                CoefficientSet::from_samples(
                    vec![c(1.0, 0.0); spike.len()],
                    spike.iter().map(|v| c(amplitude * v, 0.0)).collect(),
                    spike.iter().map(|v| c(0.5 * amplitude * v, 0.0)).collect(),
                    spike.iter().map(|v| c(0.0, 0.5 * amplitude * v)).collect(),
                )
            }
        }
    }
}

/// Boundary angle `theta` with `0 <= Re theta < pi`; `theta = 0` is Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCondition {
    pub theta: C64,
}

impl BoundaryCondition {
    pub fn dirichlet() -> Self {
        Self { theta: c(0.0, 0.0) }
    }

    pub fn neumann() -> Self {
        Self { theta: c(PI / 2.0, 0.0) }
    }

    pub fn robin(theta: C64) -> Result<Self, MeshError> {
        if !(theta.re >= 0.0 && theta.re < PI && theta.im.is_finite()) {
            return Err(MeshError::BadAngle(theta));
        }
        Ok(Self { theta })
    }

    pub fn is_dirichlet(&self) -> bool {
        self.theta == c(0.0, 0.0)
    }

    /// `cot(theta)`, exactly zero for the Neumann angle; `None` for Dirichlet.
    pub fn cot(&self) -> Option<C64> {
        if self.is_dirichlet() {
            return None;
        }
        if self.theta == c(PI / 2.0, 0.0) {
            return Some(c(0.0, 0.0));
        }
        Some(self.theta.cos() / self.theta.sin())
    }
}

impl FromStr for BoundaryCondition {
    type Err = MeshError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let t = text.trim();
        match t.to_ascii_lowercase().as_str() {
            "dirichlet" => return Ok(Self::dirichlet()),
            "neumann" => return Ok(Self::neumann()),
            _ => {}
        }
        Self::robin(parse_complex(t).ok_or_else(|| MeshError::BadAngleText(t.to_string()))?)
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dirichlet() {
            write!(f, "dirichlet")
        } else if self.theta == c(PI / 2.0, 0.0) {
            write!(f, "neumann")
        } else {
            write!(f, "{:.16e}{:+.16e}i", self.theta.re, self.theta.im)
        }
    }
}

/// Parses `re`, `re+imi`, `re-imi` or `imi`.
pub fn parse_complex(text: &str) -> Option<C64> {
    let t = text.trim().replace(' ', "");
    if t.is_empty() {
        return None;
    }
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().ok().map(|re| c(re, 0.0));
    };
    // split at the last sign that is not part of an exponent or leading
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        if (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    match split {
        Some(k) => {
            let re = body[..k].parse::<f64>().ok()?;
            let im_text = &body[k..];
            let im = match im_text {
                "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().ok()?,
            };
            Some(c(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                s => s.parse::<f64>().ok()?,
            };
            Some(c(0.0, im))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
}

impl BoundaryPair {
    pub fn new(left: BoundaryCondition, right: BoundaryCondition) -> Self {
        Self { left, right }
    }

    pub fn dirichlet() -> Self {
        Self::new(BoundaryCondition::dirichlet(), BoundaryCondition::dirichlet())
    }

    pub fn neumann() -> Self {
        Self::new(BoundaryCondition::neumann(), BoundaryCondition::neumann())
    }
}
