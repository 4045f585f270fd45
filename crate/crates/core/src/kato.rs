//! Factored perturbations `B* A` of the leading-order operator and the resolvent identity
//! `R(z) = R0(z) - R0(z) B* (I - K(z))^{-1} A R0(z)`, `K(z) = -A R0(z) B*`.

use thiserror::Error;

use crate::assembly::{AssemblyError, FormMatrices, MassTreatment};
use crate::linalg::{
    c, identity, log_log_slope, real_to_complex, rel_diff, shifted, spectral_norm, CMatrix, Factorized,
    LinalgError, C64,
};
use crate::matfun::{gauss_legendre, principal_sqrt, MatfunError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KatoError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Matfun(#[from] MatfunError),
    #[error("z = {0} is in the spectrum of the unperturbed operator")]
    UnperturbedSpectrum(C64),
    #[error("1 is in the spectrum of K(z) at z = {0}")]
    NotAdmissible(C64),
    #[error("stage {stage} of the two-step composition failed at z = {z}")]
    Stage { stage: u8, z: C64 },
    #[error("matrix dimensions disagree: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PerturbationVariant {
    /// Potential and first-order term `r y'`.
    QrPair,
    /// First-order term `-(s y)'` on its own.
    SPair,
    /// All three lower-order terms at once.
    FullTriple,
}

impl PerturbationVariant {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationVariant::QrPair => "qr_pair",
            PerturbationVariant::SPair => "s_pair",
            PerturbationVariant::FullTriple => "full_triple",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockInfo {
    pub label: &'static str,
    pub rows: usize,
}

/// Lower-order part of the operator written as `B* A` in orthonormal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FactoredPerturbation {
    pub a: CMatrix,
    pub b: CMatrix,
    pub variant: PerturbationVariant,
    pub blocks: Vec<BlockInfo>,
}

impl FactoredPerturbation {
    pub fn product(&self) -> CMatrix {
        self.b.adjoint() * &self.a
    }

    pub fn aux_dim(&self) -> usize {
        self.a.nrows()
    }
}

fn stack(blocks: &[CMatrix]) -> CMatrix {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let mut out = CMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), cols)).copy_from(b);
        at += b.nrows();
    }
    out
}

fn scale_rows(m: &CMatrix, w: &[C64]) -> CMatrix {
    let mut out = m.clone();
    for (i, wi) in w.iter().enumerate() {
        for j in 0..out.ncols() {
            out[(i, j)] *= *wi;
        }
    }
    out
}

/// Phase and modulus square-root split of a complex weight: `w = phase(w)|w|^{1/2} * |w|^{1/2}`.
fn split(w: C64) -> (C64, C64) {
    let m = w.norm();
    if m == 0.0 {
        return (c(0.0, 0.0), c(0.0, 0.0));
    }
    (w / m.sqrt(), c(m.sqrt(), 0.0))
}

/// Exact discrete factorization of the selected lower-order forms.
pub fn build_factorization(forms: &FormMatrices, variant: PerturbationVariant) -> Result<FactoredPerturbation, KatoError> {
    let w = forms.mass_inv_sqrt()?;
    let h = forms.cells.h;
    let rh = h.sqrt();
    let dc = real_to_complex(&forms.cells.derivative) * &w;
    let pc = real_to_complex(&forms.cells.midpoint) * &w;
    let coeffs = &forms.coefficients;
    let n_cells = coeffs.n_cells();

    let derivative = dc.clone() * c(rh, 0.0);
    let drift_b = scale_rows(&pc, &coeffs.r.iter().map(|r| r.conj() * rh).collect::<Vec<_>>());
    let sdrift_a = scale_rows(&pc, &coeffs.s.iter().map(|s| s * rh).collect::<Vec<_>>());

    let (pot_a, pot_b) = match forms.mass_treatment {
        MassTreatment::Lumped => {
            let (wa, wb): (Vec<C64>, Vec<C64>) = forms.potential_weights().into_iter().map(split).unzip();
            (scale_rows(&w, &wa), scale_rows(&w, &wb))
        }
        MassTreatment::Consistent => {
            // q h P*P + q h^3/12 D*D cellwise
            let mut wa = Vec::with_capacity(2 * n_cells);
            let mut wb = Vec::with_capacity(2 * n_cells);
            for scale in [h, h * h * h / 12.0] {
                for q in &coeffs.q {
                    let (x, y) = split(q * scale);
                    wa.push(x);
                    wb.push(y);
                }
            }
            let base = stack(&[
                real_to_complex(&forms.cells.midpoint) * &w,
                real_to_complex(&forms.cells.derivative) * &w,
            ]);
            (scale_rows(&base, &wa), scale_rows(&base, &wb))
        }
    };

    let (a_blocks, b_blocks, labels): (Vec<CMatrix>, Vec<CMatrix>, Vec<&'static str>) = match variant {
        PerturbationVariant::QrPair => (
            vec![derivative.clone(), pot_a],
            vec![drift_b, pot_b],
            vec!["drift_r", "potential"],
        ),
        PerturbationVariant::SPair => (vec![sdrift_a], vec![derivative], vec!["drift_s"]),
        PerturbationVariant::FullTriple => (
            vec![derivative.clone(), sdrift_a, pot_a],
            vec![drift_b, derivative, pot_b],
            vec!["drift_r", "drift_s", "potential"],
        ),
    };
    let blocks = a_blocks.iter().zip(&labels).map(|(m, l)| BlockInfo { label: l, rows: m.nrows() }).collect();
    Ok(FactoredPerturbation { a: stack(&a_blocks), b: stack(&b_blocks), variant, blocks })
}

/// Orthonormal-coordinate matrix of the forms that `variant` factors.
pub fn perturbation_matrix(forms: &FormMatrices, variant: PerturbationVariant) -> Result<CMatrix, KatoError> {
    let w = forms.mass_inv_sqrt()?;
    let k = match variant {
        PerturbationVariant::QrPair => &forms.k1 + &forms.k3,
        PerturbationVariant::SPair => forms.k2.clone(),
        PerturbationVariant::FullTriple => &forms.k1 + &forms.k2 + &forms.k3,
    };
    Ok(&w * k * &w)
}

fn check_shapes(t0: &CMatrix, pert: &FactoredPerturbation) -> Result<(), KatoError> {
    let n = t0.nrows();
    if t0.ncols() != n || pert.a.ncols() != n || pert.b.ncols() != n || pert.a.nrows() != pert.b.nrows() {
        return Err(KatoError::Shape(format!(
            "T0 {}x{}, A {}x{}, B {}x{}",
            t0.nrows(),
            t0.ncols(),
            pert.a.nrows(),
            pert.a.ncols(),
            pert.b.nrows(),
            pert.b.ncols()
        )));
    }
    Ok(())
}

fn unperturbed(t0: &CMatrix, z: C64) -> Result<Factorized, KatoError> {
    Factorized::new(shifted(t0, z)).map_err(|_| KatoError::UnperturbedSpectrum(z))
}

/// `K(z) = -A (T0 - z)^{-1} B*`.
pub fn kato_k(t0: &CMatrix, pert: &FactoredPerturbation, z: C64) -> Result<CMatrix, KatoError> {
    check_shapes(t0, pert)?;
    let r0_bstar = unperturbed(t0, z)?.solve(&pert.b.adjoint());
    Ok(-(&pert.a * r0_bstar))
}

/// Resolvent of `T0 + B* A` through the factorization.
pub fn perturbed_resolvent(t0: &CMatrix, pert: &FactoredPerturbation, z: C64) -> Result<CMatrix, KatoError> {
    check_shapes(t0, pert)?;
    let f0 = unperturbed(t0, z)?;
    let r0 = f0.inverse();
    resolvent_from(&r0, pert, z)
}

fn resolvent_from(r0: &CMatrix, pert: &FactoredPerturbation, z: C64) -> Result<CMatrix, KatoError> {
    let r0_bstar = r0 * pert.b.adjoint();
    let a_r0 = &pert.a * r0;
    let k = -(&pert.a * &r0_bstar);
    let i_minus_k = identity(k.nrows()) - k;
    let solved = Factorized::new(i_minus_k)
        .map_err(|e| match e {
            LinalgError::Singular { .. } => KatoError::NotAdmissible(z),
            other => KatoError::Matfun(other.into()),
        })?
        .solve(&a_r0);
    Ok(r0 - r0_bstar * solved)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// `(z, relative Frobenius error)`
    pub rows: Vec<(C64, f64)>,
    pub max_rel_error: f64,
    /// Points skipped because they hit a spectrum.
    pub excluded: Vec<C64>,
}

/// Compares the factored resolvent with the directly assembled one.
pub fn verify_identity(
    direct: &CMatrix,
    t0: &CMatrix,
    pert: &FactoredPerturbation,
    zs: &[C64],
) -> Result<IdentityReport, KatoError> {
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for &z in zs {
        let direct_res = match Factorized::new(shifted(direct, z)) {
            Ok(f) => f.inverse(),
            Err(_) => {
                excluded.push(z);
                continue;
            }
        };
        match perturbed_resolvent(t0, pert, z) {
            Ok(r) => rows.push((z, rel_diff(&r, &direct_res))),
            Err(KatoError::UnperturbedSpectrum(_)) | Err(KatoError::NotAdmissible(_)) => excluded.push(z),
            Err(e) => return Err(e),
        }
    }
    let max_rel_error = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(IdentityReport { rows, max_rel_error, excluded })
}

/// Two-stage composition: the first-order-in-`r` and potential terms on top of `T0`, then the
/// `s` term on top of the result, using only the stage-1 resolvent.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStep {
    pub t0: CMatrix,
    pub stage1: FactoredPerturbation,
    pub stage2: FactoredPerturbation,
}

impl TwoStep {
    pub fn new(forms: &FormMatrices) -> Result<Self, KatoError> {
        Ok(Self {
            t0: forms.principal_operator()?.matrix,
            stage1: build_factorization(forms, PerturbationVariant::QrPair)?,
            stage2: build_factorization(forms, PerturbationVariant::SPair)?,
        })
    }

    pub fn stage1_resolvent(&self, z: C64) -> Result<CMatrix, KatoError> {
        perturbed_resolvent(&self.t0, &self.stage1, z).map_err(|_| KatoError::Stage { stage: 1, z })
    }

    pub fn resolvent(&self, z: C64) -> Result<CMatrix, KatoError> {
        let r1 = self.stage1_resolvent(z)?;
        resolvent_from(&r1, &self.stage2, z).map_err(|_| KatoError::Stage { stage: 2, z })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayRow {
    pub e: f64,
    pub norm_k: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub integral: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayProfile {
    pub rows: Vec<DecayRow>,
    /// log-log slope of `|K(-E)|` against `E`
    pub slope: f64,
    /// Smallest shift with `|K(-E)| = 1/2`, if the grid brackets it (or its first point if
    /// the norm is already below 1/2 there).
    pub e_star: Option<f64>,
}

/// Settings for the tail integral `int_R^Rmax l^{-1} |A (T0+l+E)^{-1/2}| |(T0+l+E)^{-1/2} B*| dl`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegral {
    pub r_min: f64,
    pub r_max: f64,
    pub n_nodes: usize,
}

impl Default for TailIntegral {
    fn default() -> Self {
        Self { r_min: 1.0, r_max: 1e6, n_nodes: 8 }
    }
}

/// `(|A S|, |S B*|)` with `S = (T0 + E)^{-1/2}`.
pub fn half_power_norms(t0: &CMatrix, pert: &FactoredPerturbation, e: f64) -> Result<(f64, f64), KatoError> {
    half_power_norms_with(t0, &Compressed::new(pert), e)
}

/// Triangular factors of thin QR of `A` and `B`. Norms of `A X B*` equal norms of `R_A X R_B*`,
/// which is `n x n` however tall the auxiliary space is.
struct Compressed {
    a: CMatrix,
    b: CMatrix,
}

impl Compressed {
    fn new(pert: &FactoredPerturbation) -> Self {
        let squash = |m: &CMatrix| if m.nrows() > m.ncols() { m.clone().qr().r() } else { m.clone() };
        Compressed { a: squash(&pert.a), b: squash(&pert.b) }
    }

    fn k_norm(&self, t0: &CMatrix, z: C64) -> Result<f64, KatoError> {
        let r0_bstar = unperturbed(t0, z)?.solve(&self.b.adjoint());
        Ok(spectral_norm(&(&self.a * r0_bstar)))
    }
}

fn half_power_norms_with(t0: &CMatrix, comp: &Compressed, e: f64) -> Result<(f64, f64), KatoError> {
    let root = principal_sqrt(&shifted(t0, c(-e, 0.0)))?;
    let s = Factorized::new(root).map_err(|_| KatoError::UnperturbedSpectrum(c(-e, 0.0)))?.inverse();
    Ok((spectral_norm(&(&comp.a * &s)), spectral_norm(&(&s * comp.b.adjoint()))))
}

/// `|K(z)|` without forming the auxiliary-sized matrix.
pub fn kato_k_norm(t0: &CMatrix, pert: &FactoredPerturbation, z: C64) -> Result<f64, KatoError> {
    check_shapes(t0, pert)?;
    Compressed::new(pert).k_norm(t0, z)
}

pub fn decay_profile(
    t0: &CMatrix,
    pert: &FactoredPerturbation,
    e_list: &[f64],
    tail: Option<TailIntegral>,
) -> Result<DecayProfile, KatoError> {
    check_shapes(t0, pert)?;
    let comp = Compressed::new(pert);
    let mut rows = Vec::with_capacity(e_list.len());
    for &e in e_list {
        let norm_k = comp.k_norm(t0, c(-e, 0.0))?;
        let (norm_a, norm_b) = half_power_norms_with(t0, &comp, e)?;
        let integral = match tail {
            Some(spec) => tail_integral(t0, &comp, e, spec)?,
            None => f64::NAN,
        };
        rows.push(DecayRow { e, norm_k, norm_a, norm_b, integral });
    }
    let es: Vec<f64> = rows.iter().map(|r| r.e).collect();
    let ks: Vec<f64> = rows.iter().map(|r| r.norm_k).collect();
    let slope = log_log_slope(&es, &ks);
    let e_star = find_e_star(t0, &comp, &rows)?;
    Ok(DecayProfile { rows, slope, e_star })
}

fn tail_integral(t0: &CMatrix, comp: &Compressed, e: f64, spec: TailIntegral) -> Result<f64, KatoError> {
    // Gauss-Legendre in ln(lambda)
    let (x, w) = gauss_legendre(spec.n_nodes.max(1));
    let (u0, u1) = (spec.r_min.ln(), spec.r_max.ln());
    let mut terms = Vec::with_capacity(x.len());
    for (xi, wi) in x.iter().zip(&w) {
        let lambda = (0.5 * (u0 + u1) + 0.5 * (u1 - u0) * xi).exp();
        let (na, nb) = half_power_norms_with(t0, comp, lambda + e)?;
        terms.push(0.5 * (u1 - u0) * wi * na * nb);
    }
    Ok(crate::linalg::pairwise_sum_real(&terms))
}

/// Bisection stops once the bracket is this narrow in `ln E`.
const E_STAR_LN_TOL: f64 = 1e-10;

fn find_e_star(t0: &CMatrix, comp: &Compressed, rows: &[DecayRow]) -> Result<Option<f64>, KatoError> {
    let Some(first) = rows.first() else { return Ok(None) };
    if first.norm_k <= 0.5 {
        return Ok(Some(first.e));
    }
    for pair in rows.windows(2) {
        if pair[0].norm_k > 0.5 && pair[1].norm_k <= 0.5 {
            let (mut lo, mut hi) = (pair[0].e.ln(), pair[1].e.ln());
            while hi - lo > E_STAR_LN_TOL {
                let mid = 0.5 * (lo + hi);
                let norm = comp.k_norm(t0, c(-mid.exp(), 0.0))?;
                if norm > 0.5 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(hi.exp()));
        }
    }
    Ok(None)
}
