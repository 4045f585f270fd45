//! Dense complex helpers shared by the numerical modules.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Pivot ratio below which an LU factorization is treated as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is numerically singular (pivot ratio {ratio:.3e})")]
    Singular { ratio: f64 },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("eigenvalue iteration did not converge for a {0}x{0} matrix")]
    EigenNotConverged(usize),
    #[error("matrix is not Hermitian positive definite")]
    NotPositiveDefinite,
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn ensure_square(m: &CMatrix) -> Result<usize, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

/// LU factorization that refuses numerically singular input.
pub struct Factorized {
    lu: nalgebra::LU<C64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Factorized {
    pub fn new(m: CMatrix) -> Result<Self, LinalgError> {
        ensure_square(&m)?;
        let lu = m.lu();
        let u = lu.u();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..u.nrows() {
            let p = u[(i, i)].norm();
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(ratio > SINGULAR_PIVOT_RATIO) {
            return Err(LinalgError::Singular { ratio });
        }
        Ok(Self { lu })
    }

    pub fn solve(&self, rhs: &CMatrix) -> CMatrix {
        self.lu.solve(rhs).expect("factorization checked nonsingular")
    }

    pub fn inverse(&self) -> CMatrix {
        self.lu.try_inverse().expect("factorization checked nonsingular")
    }

    /// Principal-branch log of the determinant, accumulated from the pivots.
    pub fn log_det(&self) -> C64 {
        let u = self.lu.u();
        let terms: Vec<C64> = (0..u.nrows()).map(|i| u[(i, i)].ln()).collect();
        let mut total = pairwise_sum(&terms);
        if self.lu.p().determinant::<f64>() < 0.0 {
            total += c(0.0, std::f64::consts::PI);
        }
        total
    }
}

pub fn inverse(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    Ok(Factorized::new(m.clone())?.inverse())
}

/// `m - z I`
pub fn shifted(m: &CMatrix, z: C64) -> CMatrix {
    let mut out = m.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] -= z;
    }
    out
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn is_hermitian(m: &CMatrix, rel_tol: f64) -> bool {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.adjoint()).norm() <= rel_tol * scale
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// `m^alpha` for Hermitian positive definite `m`, through the eigendecomposition.
pub fn hermitian_power(m: &CMatrix, alpha: f64) -> Result<CMatrix, LinalgError> {
    let (values, vectors) = hermitian_eigen(m);
    if values.first().is_some_and(|&v| !(v > 0.0)) {
        return Err(LinalgError::NotPositiveDefinite);
    }
    let scaled = CMatrix::from_fn(vectors.nrows(), vectors.ncols(), |i, j| {
        vectors[(i, j)] * values[j].powf(alpha)
    });
    Ok(&scaled * vectors.adjoint())
}

/// Eigenvalues of a general square matrix from its complex Schur form.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>, LinalgError> {
    let n = ensure_square(m)?;
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-14, 500 * n.max(10))
        .ok_or(LinalgError::EigenNotConverged(n))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Power-iteration estimate of the spectral norm on `m* m`.
/// Returns a lower bound that converges to the true norm.
pub fn power_norm(m: &CMatrix, max_steps: usize, tol: f64, seed: u64) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut rng = seeded_rng(seed);
    let mut v = random_unit_vector(n, &mut rng);
    let mut estimate = 0.0;
    for _ in 0..max_steps {
        let w = m * &v;
        let next = w.norm();
        let back = m.adjoint() * w;
        let len = back.norm();
        if len == 0.0 {
            return next;
        }
        v = back / c(len, 0.0);
        let done = (next - estimate).abs() <= tol * next.max(f64::MIN_POSITIVE);
        estimate = next;
        if done {
            break;
        }
    }
    estimate.max((m * &v).norm())
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_complex_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

pub fn random_unit_vector(n: usize, rng: &mut ChaCha8Rng) -> CVector {
    let v = random_complex_vector(n, rng);
    let len = v.norm();
    v / c(len, 0.0)
}

pub fn random_complex_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im)
    })
}

/// Sum in a fixed binary-tree order so results do not depend on accumulation history.
pub fn pairwise_sum(values: &[C64]) -> C64 {
    match values.len() {
        0 => C64::new(0.0, 0.0),
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum(lo) + pairwise_sum(hi)
        }
    }
}

pub fn pairwise_sum_real(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let (lo, hi) = values.split_at(n / 2);
            pairwise_sum_real(lo) + pairwise_sum_real(hi)
        }
    }
}

/// Streaming pairwise summation of matrices; memory is logarithmic in the number of terms.
pub struct PairwiseAccumulator {
    stack: Vec<(u32, CMatrix)>,
}

impl PairwiseAccumulator {
    pub fn new() -> Self {
        Self { stack: Vec::new() }
    }

    pub fn push(&mut self, m: CMatrix) {
        let mut item = (0u32, m);
        while let Some((level, _)) = self.stack.last() {
            if *level != item.0 {
                break;
            }
            let (level, top) = self.stack.pop().unwrap();
            item = (level + 1, top + item.1);
        }
        self.stack.push(item);
    }

    pub fn finish(mut self) -> Option<CMatrix> {
        let mut acc = self.stack.pop()?.1;
        while let Some((_, m)) = self.stack.pop() {
            acc = m + acc;
        }
        Some(acc)
    }
}

impl Default for PairwiseAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Relative Frobenius distance `|a - b| / |b|`.
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let scale = b.norm();
    if scale == 0.0 {
        return a.norm();
    }
    (a - b).norm() / scale
}

pub fn diag(values: &[C64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_column_slice(values))
}

pub fn real_to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| c(x, 0.0))
}
