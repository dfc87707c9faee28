use crate::error::{invalid, Error, Result};
use crate::linalg::{solve_checked, CsrMatrix};

use super::space::{DgFunction, DgSpace};
use super::Theta;

/// Diffusion coefficient sampled at [`DgSpace::coefficient_points`].
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientValues {
    values: Vec<f64>,
}

impl CoefficientValues {
    /// Wraps precomputed samples, rejecting nonpositive or non-finite values.
    pub fn new(space: &DgSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.coefficient_points().len() {
            return invalid(format!(
                "{} coefficient samples for {} quadrature points",
                values.len(),
                space.coefficient_points().len()
            ));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
        {
            let x = space.coefficient_points()[i];
            return Err(Error::ModelViolation(format!(
                "diffusion coefficient {v} at ({}, {}) is not positive",
                x[0], x[1]
            )));
        }
        Ok(Self { values })
    }

    pub fn from_fn(space: &DgSpace, a: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        Self::new(space, space.coefficient_points().iter().map(|&x| a(x)).collect())
    }

    pub fn constant(space: &DgSpace, a: f64) -> Result<Self> {
        Self::new(space, vec![a; space.coefficient_points().len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn volume(&self, space: &DgSpace, e: usize, q: usize) -> f64 {
        self.values[e * space.nqv + q]
    }

    pub(crate) fn face(&self, space: &DgSpace, f: usize, q: usize) -> f64 {
        self.values[space.num_volume_points() + f * space.nqf + q]
    }
}

/// Operator, load and the parameters they were built with.
#[derive(Clone, Debug)]
pub struct AssembledSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub theta: Theta,
    pub eta: f64,
    /// Parameter sample the coefficient was evaluated at, if any.
    pub sample: Option<Vec<f64>>,
}

/// IPDG operator
/// `sum_T (a grad u, grad v)_T + sum_F (theta {a grad v}.[u] - {a grad u}.[v] + eta/h_F [u].[v])_F`,
/// rows indexed by test functions. Boundary faces use one-sided traces.
pub fn assemble_operator(
    space: &DgSpace,
    coeff: &CoefficientValues,
    theta: Theta,
    eta: f64,
) -> Result<CsrMatrix> {
    if !(eta > 0.0 && eta.is_finite()) {
        return invalid(format!("penalty must be positive, got {eta}"));
    }
    if coeff.values.len() != space.coefficient_points().len() {
        return invalid("coefficient samples do not belong to this space");
    }
    let nb = space.local_dim();
    let pat = &space.pattern;
    let mut values = vec![0.0; pat.col_idx.len()];
    let th = theta.value();

    for e in 0..space.mesh().num_elements() {
        let blk = pat.diag_block[e];
        for q in 0..space.nqv {
            let w = space.vol_weights[e * space.nqv + q] * coeff.volume(space, e, q);
            let g = &space.vol_grad[(e * space.nqv + q) * nb..(e * space.nqv + q + 1) * nb];
            for i in 0..nb {
                for j in 0..nb {
                    values[pat.entry(e, i, blk, j, nb)] += w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                }
            }
        }
    }

    let mut dn = [[0.0; 6]; 2];
    for (f, face) in space.mesh().faces().iter().enumerate() {
        let n = face.normal;
        let (sides, avg) = if face.is_boundary() { (1, 1.0) } else { (2, 0.5) };
        let pen = eta / face.length;
        for q in 0..space.nqf {
            let k = (f * space.nqf + q) * nb;
            let w = space.face_weights[f * space.nqf + q];
            let a = coeff.face(space, f, q);
            for s in 0..sides {
                for b in 0..nb {
                    let g = space.face_grad[s][k + b];
                    dn[s][b] = a * (g[0] * n[0] + g[1] * n[1]);
                }
            }
            for sv in 0..sides {
                let sign_v = if sv == 0 { 1.0 } else { -1.0 };
                let phi_v = &space.face_phi[sv][k..k + nb];
                for su in 0..sides {
                    let sign_u = if su == 0 { 1.0 } else { -1.0 };
                    let phi_u = &space.face_phi[su][k..k + nb];
                    let (row_elem, blk) = pat.face_blocks[f][sv][su];
                    for i in 0..nb {
                        for j in 0..nb {
                            let val = th * avg * dn[sv][i] * sign_u * phi_u[j]
                                - avg * dn[su][j] * sign_v * phi_v[i]
                                + pen * sign_u * sign_v * phi_u[j] * phi_v[i];
                            values[pat.entry(row_elem, i, blk, j, nb)] += w * val;
                        }
                    }
                }
            }
        }
    }
    let n = space.num_dofs();
    Ok(CsrMatrix::from_parts(
        n,
        n,
        pat.row_ptr.clone(),
        pat.col_idx.clone(),
        values,
    ))
}

/// `b_i = int_D f phi_i` by element quadrature.
pub fn assemble_load(space: &DgSpace, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let nb = space.local_dim();
    let nqv = space.nqv;
    let points = space.coefficient_points();
    let mut b = vec![0.0; space.num_dofs()];
    for e in 0..space.mesh().num_elements() {
        for q in 0..nqv {
            let wf = space.vol_weights[e * nqv + q] * f(points[e * nqv + q]);
            for i in 0..nb {
                b[e * nb + i] += wf * space.vol_phi[q * nb + i];
            }
        }
    }
    b
}

pub fn assemble_ipdg(
    space: &DgSpace,
    coeff: &CoefficientValues,
    theta: Theta,
    eta: f64,
    rhs: Vec<f64>,
) -> Result<AssembledSystem> {
    if rhs.len() != space.num_dofs() {
        return invalid(format!(
            "load vector of length {} for {} dofs",
            rhs.len(),
            space.num_dofs()
        ));
    }
    Ok(AssembledSystem {
        matrix: assemble_operator(space, coeff, theta, eta)?,
        rhs,
        theta,
        eta,
        sample: None,
    })
}

/// Relative residual accepted by [`solve_system`].
pub const SOLVE_TOLERANCE: f64 = 1e-10;

/// Direct banded LU solve with one step of iterative refinement.
pub fn solve_system(sys: &AssembledSystem) -> Result<DgFunction> {
    let coeffs = solve_checked(&sys.matrix, &sys.rhs, SOLVE_TOLERANCE)?;
    Ok(DgFunction { coeffs })
}
