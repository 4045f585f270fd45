//! Piecewise-linear form matrices and the orthonormal-coordinate operator.
//!
//! Nodal coordinates carry the sesquilinear forms: `g* K f` is the form evaluated on the
//! interpolants of `f` and `g`. Multiplying by `M^{-1/2}` on both sides gives the matrix of the
//! operator in an orthonormal basis of the discrete L² space.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{c, hermitian_power, real_to_complex, CMatrix, LinalgError, C64};
use crate::mesh::{BoundaryPair, CoefficientSet, IntervalSpec, Mesh, MeshError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssemblyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("coefficient samples ({got}) do not match mesh cells ({expected})")]
    CellMismatch { expected: usize, got: usize },
    #[error("mass matrix is not positive definite")]
    MassNotPositive,
    #[error("no degrees of freedom left after boundary conditions")]
    NoDofs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassTreatment {
    #[default]
    Lumped,
    Consistent,
}

impl MassTreatment {
    pub fn name(&self) -> &'static str {
        match self {
            MassTreatment::Lumped => "lumped",
            MassTreatment::Consistent => "consistent",
        }
    }
}

/// Cell-level maps from degrees of freedom: difference quotient and midpoint average.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOperators {
    pub derivative: DMatrix<f64>,
    pub midpoint: DMatrix<f64>,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrices {
    pub mass: CMatrix,
    pub k0: CMatrix,
    pub k1: CMatrix,
    pub k2: CMatrix,
    pub k3: CMatrix,
    pub bdry: CMatrix,
    /// Mesh node index of each degree of freedom.
    pub dof_nodes: Vec<usize>,
    pub cells: CellOperators,
    pub mass_treatment: MassTreatment,
    pub coefficients: CoefficientSet,
    pub bc: BoundaryPair,
    pub interval: IntervalSpec,
    pub nodes: Vec<f64>,
}

pub fn assemble_forms(
    mesh: &Mesh,
    coeffs: &CoefficientSet,
    bc: BoundaryPair,
    mass_treatment: MassTreatment,
) -> Result<FormMatrices, AssemblyError> {
    let n_cells = mesh.n_cells();
    if coeffs.n_cells() != n_cells {
        return Err(AssemblyError::CellMismatch { expected: n_cells, got: coeffs.n_cells() });
    }
    let dof_nodes: Vec<usize> = (0..=n_cells)
        .filter(|&i| !(i == 0 && bc.left.is_dirichlet()) && !(i == n_cells && bc.right.is_dirichlet()))
        .collect();
    let n_dof = dof_nodes.len();
    if n_dof == 0 {
        return Err(AssemblyError::NoDofs);
    }
    let h = mesh.h;
    let mut derivative = DMatrix::<f64>::zeros(n_cells, n_dof);
    let mut midpoint = DMatrix::<f64>::zeros(n_cells, n_dof);
    for (k, &node) in dof_nodes.iter().enumerate() {
        if node < n_cells {
            derivative[(node, k)] = -1.0 / h;
            midpoint[(node, k)] = 0.5;
        }
        if node > 0 {
            derivative[(node - 1, k)] = 1.0 / h;
            midpoint[(node - 1, k)] = 0.5;
        }
    }
    let dc = real_to_complex(&derivative);
    let pc = real_to_complex(&midpoint);
    let weighted = |w: &[C64]| crate::linalg::diag(&w.iter().map(|v| v * h).collect::<Vec<_>>());

    let k0 = dc.transpose() * weighted(&coeffs.p) * &dc;
    let k1 = pc.transpose() * weighted(&coeffs.r) * &dc;
    let k2 = dc.transpose() * weighted(&coeffs.s) * &pc;
    let ones = vec![c(1.0, 0.0); n_cells];
    let (mass, k3) = match mass_treatment {
        MassTreatment::Lumped => (
            crate::linalg::diag(&lumped_node_weights(&ones, &dof_nodes, h)),
            crate::linalg::diag(&lumped_node_weights(&coeffs.q, &dof_nodes, h)),
        ),
        MassTreatment::Consistent => {
            let bubble = h * h / 12.0;
            let consistent = |w: &[C64]| {
                let curv: Vec<C64> = w.iter().map(|v| v * bubble).collect();
                pc.transpose() * weighted(w) * &pc + dc.transpose() * weighted(&curv) * &dc
            };
            (consistent(&ones), consistent(&coeffs.q))
        }
    };

    let mut bdry = CMatrix::zeros(n_dof, n_dof);
    if let Some(cot) = bc.left.cot() {
        bdry[(0, 0)] -= cot;
    }
    if let Some(cot) = bc.right.cot() {
        bdry[(n_dof - 1, n_dof - 1)] -= cot;
    }

    Ok(FormMatrices {
        mass,
        k0,
        k1,
        k2,
        k3,
        bdry,
        dof_nodes,
        cells: CellOperators { derivative, midpoint, h },
        mass_treatment,
        coefficients: coeffs.clone(),
        bc,
        interval: mesh.interval,
        nodes: mesh.nodes.clone(),
    })
}

/// `sum over cells e containing node i of w_e h / 2`, for each degree of freedom.
pub fn lumped_node_weights(cell_values: &[C64], dof_nodes: &[usize], h: f64) -> Vec<C64> {
    let n_cells = cell_values.len();
    dof_nodes
        .iter()
        .map(|&i| {
            let mut w = c(0.0, 0.0);
            if i > 0 {
                w += cell_values[i - 1] * (0.5 * h);
            }
            if i < n_cells {
                w += cell_values[i] * (0.5 * h);
            }
            w
        })
        .collect()
}

impl FormMatrices {
    pub fn n_dof(&self) -> usize {
        self.dof_nodes.len()
    }

    /// Matrix of the full form `q0 + q1 + q2 + q3` plus boundary terms.
    pub fn stiffness(&self) -> CMatrix {
        &self.k0 + &self.k1 + &self.k2 + &self.k3 + &self.bdry
    }

    /// Leading-order part `q0` plus boundary terms.
    pub fn principal(&self) -> CMatrix {
        &self.k0 + &self.bdry
    }

    /// Diagonal of the lumped potential matrix.
    pub fn potential_weights(&self) -> Vec<C64> {
        lumped_node_weights(&self.coefficients.q, &self.dof_nodes, self.cells.h)
    }

    pub fn mass_weights(&self) -> Vec<f64> {
        let ones = vec![c(1.0, 0.0); self.cells.derivative.nrows()];
        lumped_node_weights(&ones, &self.dof_nodes, self.cells.h).iter().map(|w| w.re).collect()
    }

    pub fn dof_positions(&self) -> Vec<f64> {
        self.dof_nodes.iter().map(|&i| self.nodes[i]).collect()
    }

    /// `M^{-1/2}` for the active mass treatment.
    pub fn mass_inv_sqrt(&self) -> Result<CMatrix, AssemblyError> {
        match self.mass_treatment {
            MassTreatment::Lumped => {
                let d: Vec<C64> = (0..self.n_dof())
                    .map(|i| {
                        let m = self.mass[(i, i)].re;
                        c(1.0 / m.sqrt(), 0.0)
                    })
                    .collect();
                if d.iter().any(|v| !v.re.is_finite()) {
                    return Err(AssemblyError::MassNotPositive);
                }
                Ok(crate::linalg::diag(&d))
            }
            MassTreatment::Consistent => {
                hermitian_power(&self.mass, -0.5).map_err(|_| AssemblyError::MassNotPositive)
            }
        }
    }

    /// Operator of the full form in orthonormal coordinates.
    pub fn operator(&self) -> Result<DiscreteOperator, AssemblyError> {
        orthonormalize(self, &self.stiffness())
    }

    /// Operator of the leading-order form (with boundary terms) in orthonormal coordinates.
    pub fn principal_operator(&self) -> Result<DiscreteOperator, AssemblyError> {
        orthonormalize(self, &self.principal())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMeta {
    pub interval: IntervalSpec,
    pub bc: BoundaryPair,
    pub coefficient_hash: u64,
    pub mass_treatment: MassTreatment,
    pub n_dof: usize,
}

/// Operator matrix in orthonormal coordinates, with the change of basis that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperator {
    pub matrix: CMatrix,
    pub mass_inv_sqrt: CMatrix,
    pub meta: OperatorMeta,
}

/// `M^{-1/2} S M^{-1/2}` for a stiffness matrix `S` assembled on `forms`' degrees of freedom.
pub fn orthonormalize(forms: &FormMatrices, stiffness: &CMatrix) -> Result<DiscreteOperator, AssemblyError> {
    let w = forms.mass_inv_sqrt()?;
    Ok(DiscreteOperator {
        matrix: &w * stiffness * &w,
        mass_inv_sqrt: w,
        meta: OperatorMeta {
            interval: forms.interval,
            bc: forms.bc,
            coefficient_hash: forms.coefficients.fingerprint(),
            mass_treatment: forms.mass_treatment,
            n_dof: forms.n_dof(),
        },
    })
}

/// Nodal matrix of `|f'|^2 + E |f|^2` on the degrees of freedom selected by `bc`.
pub fn w12_norm_matrix(
    mesh: &Mesh,
    bc: BoundaryPair,
    e: f64,
    mass_treatment: MassTreatment,
) -> Result<CMatrix, AssemblyError> {
    let forms = assemble_forms(mesh, &CoefficientSet::laplacian(mesh), bc, mass_treatment)?;
    Ok(&forms.k0 + &forms.mass * c(e, 0.0))
}

/// The same norm in orthonormal coordinates of `forms`.
pub fn w12_norm_orthonormal(forms: &FormMatrices, e: f64) -> Result<CMatrix, AssemblyError> {
    let mesh = Mesh { interval: forms.interval, nodes: forms.nodes.clone(), h: forms.cells.h };
    let g = w12_norm_matrix(&mesh, forms.bc, e, forms.mass_treatment)?;
    let w = forms.mass_inv_sqrt()?;
    Ok(&w * g * &w)
}
