use crate::error::{invalid, Error, Result};
use crate::linalg::{solve_checked, CsrMatrix};
use crate::mesh::Mesh;
use crate::quadrature::TriangleRule;

use super::assembly::SOLVE_TOLERANCE;

/// Continuous piecewise-linear Galerkin discretization on the structured
/// mesh with homogeneous Dirichlet data imposed strongly.
#[derive(Clone, Debug)]
pub struct ConformingP1 {
    mesh: Mesh,
    /// Unknown index of each vertex; `None` on the boundary.
    unknown: Vec<Option<usize>>,
    num_unknowns: usize,
    nq: usize,
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    phi: Vec<[f64; 3]>,
    grads: Vec<[[f64; 2]; 3]>,
}

/// Nodal values at every mesh vertex (zero on the boundary).
#[derive(Clone, Debug, PartialEq)]
pub struct NodalFunction {
    pub values: Vec<f64>,
}

impl ConformingP1 {
    pub fn new(m: usize) -> Result<Self> {
        let mesh = Mesh::structured(m)?;
        let on_boundary = |p: [f64; 2]| p[0] == 0.0 || p[1] == 0.0 || p[0] == 1.0 || p[1] == 1.0;
        let mut num_unknowns = 0;
        let unknown = mesh
            .vertices()
            .iter()
            .map(|&p| {
                (!on_boundary(p)).then(|| {
                    num_unknowns += 1;
                    num_unknowns - 1
                })
            })
            .collect();
        let rule = TriangleRule::with_degree(4);
        let nq = rule.len();
        let phi = rule
            .points
            .iter()
            .map(|r| [1.0 - r[0] - r[1], r[0], r[1]])
            .collect();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        let mut grads = Vec::new();
        for e in 0..mesh.num_elements() {
            let [p0, p1, p2] = mesh.element_points(e);
            let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
            grads.push([
                [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
            ]);
            for (r, w) in rule.points.iter().zip(&rule.weights) {
                points.push([
                    p0[0] + (p1[0] - p0[0]) * r[0] + (p2[0] - p0[0]) * r[1],
                    p0[1] + (p1[1] - p0[1]) * r[0] + (p2[1] - p0[1]) * r[1],
                ]);
                weights.push(w * det.abs());
            }
        }
        Ok(Self {
            mesh,
            unknown,
            num_unknowns,
            nq,
            points,
            weights,
            phi,
            grads,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn num_unknowns(&self) -> usize {
        self.num_unknowns
    }

    /// Element quadrature nodes where the coefficient is sampled.
    pub fn coefficient_points(&self) -> &[[f64; 2]] {
        &self.points
    }

    /// Load vector over the interior unknowns.
    pub fn load(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        let mut b = vec![0.0; self.num_unknowns];
        for (e, el) in self.mesh.elements().iter().enumerate() {
            for q in 0..self.nq {
                let k = e * self.nq + q;
                let wf = self.weights[k] * f(self.points[k]);
                for (a, &v) in el.iter().enumerate() {
                    if let Some(i) = self.unknown[v] {
                        b[i] += wf * self.phi[q][a];
                    }
                }
            }
        }
        b
    }

    pub fn stiffness(&self, coeff: &[f64]) -> Result<CsrMatrix> {
        if coeff.len() != self.points.len() {
            return invalid(format!(
                "{} coefficient samples for {} quadrature points",
                coeff.len(),
                self.points.len()
            ));
        }
        if let Some(i) = coeff.iter().position(|a| !(*a > 0.0 && a.is_finite())) {
            let x = self.points[i];
            return Err(Error::ModelViolation(format!(
                "diffusion coefficient {} at ({}, {}) is not positive",
                coeff[i], x[0], x[1]
            )));
        }
        let mut trip = Vec::with_capacity(9 * self.mesh.num_elements());
        for (e, el) in self.mesh.elements().iter().enumerate() {
            let aw: f64 = (0..self.nq)
                .map(|q| self.weights[e * self.nq + q] * coeff[e * self.nq + q])
                .sum();
            let g = &self.grads[e];
            for a in 0..3 {
                let Some(i) = self.unknown[el[a]] else { continue };
                for b in 0..3 {
                    let Some(j) = self.unknown[el[b]] else { continue };
                    trip.push((i, j, aw * (g[a][0] * g[b][0] + g[a][1] * g[b][1])));
                }
            }
        }
        Ok(CsrMatrix::from_triplets(
            self.num_unknowns,
            self.num_unknowns,
            &trip,
        ))
    }

    pub fn solve(&self, coeff: &[f64], load: &[f64]) -> Result<NodalFunction> {
        if load.len() != self.num_unknowns {
            return invalid("load vector does not match the interior unknowns");
        }
        let a = self.stiffness(coeff)?;
        let x = if self.num_unknowns == 0 {
            Vec::new()
        } else {
            solve_checked(&a, load, SOLVE_TOLERANCE)?
        };
        let values = self.unknown.iter().map(|u| u.map_or(0.0, |i| x[i])).collect();
        Ok(NodalFunction { values })
    }

    /// Exact `||u||^2_{L^2}` via the P1 element mass matrix `|T|/12 (1 + delta_ij)`.
    pub fn l2_norm_sq(&self, u: &NodalFunction) -> f64 {
        self.mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, el)| {
                let v = el.map(|i| u.values[i]);
                let s: f64 = v.iter().sum();
                let sq: f64 = v.iter().map(|x| x * x).sum();
                self.mesh.area(e) / 12.0 * (s * s + sq)
            })
            .sum()
    }

    pub fn mean(&self, u: &NodalFunction) -> f64 {
        self.mesh
            .elements()
            .iter()
            .enumerate()
            .map(|(e, el)| self.mesh.area(e) * el.iter().map(|&i| u.values[i]).sum::<f64>() / 3.0)
            .sum()
    }

    /// `||u - f||_{L^2}` with a 64-point rule per element.
    pub fn l2_error(&self, u: &NodalFunction, f: impl Fn([f64; 2]) -> f64) -> f64 {
        let rule = TriangleRule::collapsed_gauss(8);
        let mut s = 0.0;
        for (e, el) in self.mesh.elements().iter().enumerate() {
            let [p0, p1, p2] = self.mesh.element_points(e);
            let jac = 2.0 * self.mesh.area(e);
            for (r, w) in rule.points.iter().zip(&rule.weights) {
                let l = [1.0 - r[0] - r[1], r[0], r[1]];
                let uh: f64 = (0..3).map(|a| l[a] * u.values[el[a]]).sum();
                let x = [
                    l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0],
                    l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1],
                ];
                let d = uh - f(x);
                s += w * jac * d * d;
            }
        }
        s.sqrt()
    }
}

/// Builds and solves the conforming P1 problem in one call.
pub fn solve_conforming_p1(
    m: usize,
    a: impl Fn([f64; 2]) -> f64,
    f: impl Fn([f64; 2]) -> f64,
) -> Result<(ConformingP1, NodalFunction)> {
    let p1 = ConformingP1::new(m)?;
    let coeff: Vec<f64> = p1.coefficient_points().iter().map(|&x| a(x)).collect();
    let load = p1.load(f);
    let u = p1.solve(&coeff, &load)?;
    Ok((p1, u))
}
