use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{GaussLegendre, TriangleRule};

/// Broken polynomial space `V_h = {v in L^2: v|_T in P_k(T)}` with a
/// monomial basis in reference coordinates and element-blocked dofs.
///
/// All quadrature data (volume and face nodes, basis values, physical
/// gradients) is precomputed at construction, as is the CSR pattern of the
/// IPDG operator.
#[derive(Clone, Debug)]
pub struct DgSpace {
    mesh: Mesh,
    degree: usize,
    nb: usize,
    pub(crate) nqv: usize,
    pub(crate) nqf: usize,
    pub(crate) vol_weights: Vec<f64>,
    pub(crate) vol_phi: Vec<f64>,
    pub(crate) vol_grad: Vec<[f64; 2]>,
    pub(crate) face_weights: Vec<f64>,
    pub(crate) face_phi: [Vec<f64>; 2],
    pub(crate) face_grad: [Vec<[f64; 2]>; 2],
    coeff_points: Vec<[f64; 2]>,
    origin: Vec<[f64; 2]>,
    jinv: Vec<[[f64; 2]; 2]>,
    mass: Vec<f64>,
    pub(crate) pattern: OperatorPattern,
}

/// CSR layout of the element-blocked operator: each element row block holds
/// its own block and those of its face neighbours, in ascending order.
#[derive(Clone, Debug)]
pub(crate) struct OperatorPattern {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    row_base: Vec<usize>,
    row_stride: Vec<usize>,
    /// Position of the element's own block in its row block.
    pub diag_block: Vec<usize>,
    /// For each face and (test side, trial side): row element and block position.
    pub face_blocks: Vec<[[(usize, usize); 2]; 2]>,
}

impl OperatorPattern {
    #[inline]
    pub fn entry(&self, row_elem: usize, i: usize, block: usize, j: usize, nb: usize) -> usize {
        self.row_base[row_elem] + i * self.row_stride[row_elem] + block * nb + j
    }
}

/// Dimension of `P_k` in two variables.
pub fn local_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Monomials `1, xi, eta, xi^2, xi eta, eta^2` up to total degree `degree`.
pub(crate) fn basis_values(degree: usize, p: [f64; 2], out: &mut [f64]) {
    let (x, y) = (p[0], p[1]);
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = x;
        out[2] = y;
    }
    if degree >= 2 {
        out[3] = x * x;
        out[4] = x * y;
        out[5] = y * y;
    }
}

pub(crate) fn basis_ref_gradients(degree: usize, p: [f64; 2], out: &mut [[f64; 2]]) {
    let (x, y) = (p[0], p[1]);
    out[0] = [0.0, 0.0];
    if degree >= 1 {
        out[1] = [1.0, 0.0];
        out[2] = [0.0, 1.0];
    }
    if degree >= 2 {
        out[3] = [2.0 * x, 0.0];
        out[4] = [y, x];
        out[5] = [0.0, 2.0 * y];
    }
}

impl DgSpace {
    /// Quadrature of order `2k + 2` on elements and faces.
    pub fn new(mesh: Mesh, degree: usize) -> Result<Self> {
        if !(1..=2).contains(&degree) {
            return invalid(format!("polynomial degree must be 1 or 2, got {degree}"));
        }
        let quality = mesh.quality_report();
        if quality.degenerate {
            return Err(Error::Validation("mesh has degenerate elements".into()));
        }
        let nb = local_dim(degree);
        let vol_rule = TriangleRule::with_degree(2 * degree + 2);
        let face_rule = GaussLegendre::with_degree(2 * degree + 2);
        let (ne, nf) = (mesh.num_elements(), mesh.num_faces());
        let (nqv, nqf) = (vol_rule.len(), face_rule.len());

        let mut origin = Vec::with_capacity(ne);
        let mut jinv = Vec::with_capacity(ne);
        let mut vol_points = Vec::with_capacity(ne * nqv);
        let mut vol_weights = Vec::with_capacity(ne * nqv);
        let mut vol_grad = vec![[0.0; 2]; ne * nqv * nb];
        let mut vol_phi = vec![0.0; nqv * nb];
        for (q, &p) in vol_rule.points.iter().enumerate() {
            basis_values(degree, p, &mut vol_phi[q * nb..(q + 1) * nb]);
        }
        let mut gref = vec![[0.0; 2]; nb];
        for e in 0..ne {
            let [p0, p1, p2] = mesh.element_points(e);
            let j = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            let inv = [[j[1][1] / det, -j[0][1] / det], [-j[1][0] / det, j[0][0] / det]];
            origin.push(p0);
            jinv.push(inv);
            for (q, (&r, &w)) in vol_rule.points.iter().zip(&vol_rule.weights).enumerate() {
                vol_points.push([
                    p0[0] + j[0][0] * r[0] + j[0][1] * r[1],
                    p0[1] + j[1][0] * r[0] + j[1][1] * r[1],
                ]);
                vol_weights.push(w * det.abs());
                basis_ref_gradients(degree, r, &mut gref);
                for (b, g) in gref.iter().enumerate() {
                    vol_grad[(e * nqv + q) * nb + b] = apply_inv_transpose(&inv, *g);
                }
            }
        }

        let mut face_points = Vec::with_capacity(nf * nqf);
        let mut face_weights = Vec::with_capacity(nf * nqf);
        let mut face_phi = [vec![0.0; nf * nqf * nb], vec![0.0; nf * nqf * nb]];
        let mut face_grad = [vec![[0.0; 2]; nf * nqf * nb], vec![[0.0; 2]; nf * nqf * nb]];
        for (f, face) in mesh.faces().iter().enumerate() {
            let a = mesh.vertices()[face.vertices[0]];
            let b = mesh.vertices()[face.vertices[1]];
            for (q, (&t, &w)) in face_rule.nodes.iter().zip(&face_rule.weights).enumerate() {
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                face_points.push(x);
                face_weights.push(w * face.length);
                for (side, elem) in [Some(face.plus), face.minus].into_iter().enumerate() {
                    let Some(e) = elem else { continue };
                    let r = to_reference(&origin[e], &jinv[e], x);
                    let k = (f * nqf + q) * nb;
                    basis_values(degree, r, &mut face_phi[side][k..k + nb]);
                    basis_ref_gradients(degree, r, &mut gref);
                    for (bi, g) in gref.iter().enumerate() {
                        face_grad[side][k + bi] = apply_inv_transpose(&jinv[e], *g);
                    }
                }
            }
        }

        // element mass matrices
        let mut mass = vec![0.0; ne * nb * nb];
        for e in 0..ne {
            for q in 0..nqv {
                let w = vol_weights[e * nqv + q];
                let phi = &vol_phi[q * nb..(q + 1) * nb];
                for i in 0..nb {
                    for j in 0..nb {
                        mass[(e * nb + i) * nb + j] += w * phi[i] * phi[j];
                    }
                }
            }
        }

        let pattern = build_pattern(&mesh, nb);
        let mut coeff_points = vol_points;
        coeff_points.extend(face_points);
        Ok(Self {
            mesh,
            degree,
            nb,
            nqv,
            nqf,
            vol_weights,
            vol_phi,
            vol_grad,
            face_weights,
            face_phi,
            face_grad,
            coeff_points,
            origin,
            jinv,
            mass,
            pattern,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Basis functions per element, `(k+1)(k+2)/2`.
    pub fn local_dim(&self) -> usize {
        self.nb
    }

    pub fn num_dofs(&self) -> usize {
        self.nb * self.mesh.num_elements()
    }

    /// Points where the diffusion coefficient is sampled during assembly:
    /// all volume quadrature nodes (element by element) followed by all face
    /// quadrature nodes (face by face).
    pub fn coefficient_points(&self) -> &[[f64; 2]] {
        &self.coeff_points
    }

    pub(crate) fn num_volume_points(&self) -> usize {
        self.nqv * self.mesh.num_elements()
    }

    /// Element mass matrix, row-major `nb x nb`.
    pub fn element_mass(&self, e: usize) -> &[f64] {
        &self.mass[e * self.nb * self.nb..(e + 1) * self.nb * self.nb]
    }

    /// Maps a physical point to the reference coordinates of element `e`.
    pub fn to_reference(&self, e: usize, x: [f64; 2]) -> [f64; 2] {
        to_reference(&self.origin[e], &self.jinv[e], x)
    }

    pub fn from_reference(&self, e: usize, r: [f64; 2]) -> [f64; 2] {
        let [p0, p1, p2] = self.mesh.element_points(e);
        [
            p0[0] + (p1[0] - p0[0]) * r[0] + (p2[0] - p0[0]) * r[1],
            p0[1] + (p1[1] - p0[1]) * r[0] + (p2[1] - p0[1]) * r[1],
        ]
    }

    /// Value of `u` restricted to element `e` at reference point `r`.
    pub fn eval_local(&self, u: &DgFunction, e: usize, r: [f64; 2]) -> f64 {
        let mut phi = [0.0; 6];
        basis_values(self.degree, r, &mut phi);
        u.coeffs[e * self.nb..(e + 1) * self.nb]
            .iter()
            .zip(&phi)
            .map(|(c, p)| c * p)
            .sum()
    }

    /// Physical gradient of `u` on element `e` at reference point `r`.
    pub fn grad_local(&self, u: &DgFunction, e: usize, r: [f64; 2]) -> [f64; 2] {
        let mut g = [[0.0; 2]; 6];
        basis_ref_gradients(self.degree, r, &mut g);
        let mut out = [0.0; 2];
        for (c, gr) in u.coeffs[e * self.nb..(e + 1) * self.nb].iter().zip(&g) {
            let gp = apply_inv_transpose(&self.jinv[e], *gr);
            out[0] += c * gp[0];
            out[1] += c * gp[1];
        }
        out
    }

    /// Local `L^2` projection of `f` (computed with the volume rule).
    pub fn project(&self, f: impl Fn([f64; 2]) -> f64) -> DgFunction {
        let nb = self.nb;
        let mut coeffs = vec![0.0; self.num_dofs()];
        for e in 0..self.mesh.num_elements() {
            let mut rhs = vec![0.0; nb];
            for q in 0..self.nqv {
                let w = self.vol_weights[e * self.nqv + q];
                let fx = f(self.coeff_points[e * self.nqv + q]);
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r += w * fx * self.vol_phi[q * nb + i];
                }
            }
            let sol = dense_solve(self.element_mass(e).to_vec(), rhs, nb);
            coeffs[e * nb..(e + 1) * nb].copy_from_slice(&sol);
        }
        DgFunction { coeffs }
    }

    pub fn zero(&self) -> DgFunction {
        DgFunction {
            coeffs: vec![0.0; self.num_dofs()],
        }
    }

    /// The constant function `c` (the first basis function is `1`).
    pub fn constant(&self, c: f64) -> DgFunction {
        let mut u = self.zero();
        for e in 0..self.mesh.num_elements() {
            u.coeffs[e * self.nb] = c;
        }
        u
    }

    pub fn function(&self, coeffs: Vec<f64>) -> Result<DgFunction> {
        if coeffs.len() != self.num_dofs() {
            return invalid(format!(
                "coefficient vector of length {} does not match {} dofs",
                coeffs.len(),
                self.num_dofs()
            ));
        }
        Ok(DgFunction { coeffs })
    }

    /// Traces `(u|_plus, u|_minus)` at the quadrature nodes of face `f`.
    pub fn face_traces(&self, u: &DgFunction, f: usize) -> Vec<(f64, Option<f64>)> {
        let face = &self.mesh.faces()[f];
        (0..self.nqf)
            .map(|q| {
                let k = (f * self.nqf + q) * self.nb;
                let val = |side: usize, e: usize| -> f64 {
                    (0..self.nb)
                        .map(|b| self.face_phi[side][k + b] * u.coeffs[e * self.nb + b])
                        .sum()
                };
                (val(0, face.plus), face.minus.map(|m| val(1, m)))
            })
            .collect()
    }

    pub(crate) fn check(&self, u: &DgFunction) -> Result<()> {
        if u.coeffs.len() != self.num_dofs() {
            return invalid(format!(
                "function has {} coefficients, space has {} dofs",
                u.coeffs.len(),
                self.num_dofs()
            ));
        }
        Ok(())
    }
}

/// Coefficients of a discrete function in a [`DgSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DgFunction {
    pub coeffs: Vec<f64>,
}

impl DgFunction {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

#[inline]
fn apply_inv_transpose(inv: &[[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [
        inv[0][0] * g[0] + inv[1][0] * g[1],
        inv[0][1] * g[0] + inv[1][1] * g[1],
    ]
}

#[inline]
fn to_reference(origin: &[f64; 2], inv: &[[f64; 2]; 2], x: [f64; 2]) -> [f64; 2] {
    let d = [x[0] - origin[0], x[1] - origin[1]];
    [
        inv[0][0] * d[0] + inv[0][1] * d[1],
        inv[1][0] * d[0] + inv[1][1] * d[1],
    ]
}

/// Gaussian elimination with partial pivoting for the small local systems.
pub(crate) fn dense_solve(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Vec<f64> {
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap();
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        for i in k + 1..n {
            let l = a[i * n + k] / a[k * n + k];
            for c in k..n {
                a[i * n + c] -= l * a[k * n + c];
            }
            b[i] -= l * b[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| a[k * n + c] * b[c]).sum();
        b[k] = (b[k] - s) / a[k * n + k];
    }
    b
}

fn build_pattern(mesh: &Mesh, nb: usize) -> OperatorPattern {
    let ne = mesh.num_elements();
    let mut blocks: Vec<Vec<usize>> = (0..ne).map(|e| vec![e]).collect();
    for face in mesh.faces() {
        if let Some(m) = face.minus {
            blocks[face.plus].push(m);
            blocks[m].push(face.plus);
        }
    }
    for b in &mut blocks {
        b.sort_unstable();
        b.dedup();
    }
    let mut row_ptr = Vec::with_capacity(ne * nb + 1);
    let mut col_idx = Vec::new();
    let mut row_base = Vec::with_capacity(ne);
    let mut row_stride = Vec::with_capacity(ne);
    row_ptr.push(0);
    for bl in &blocks {
        row_base.push(col_idx.len());
        row_stride.push(bl.len() * nb);
        for _ in 0..nb {
            for &c in bl {
                col_idx.extend((0..nb).map(|j| c * nb + j));
            }
            row_ptr.push(col_idx.len());
        }
    }
    let pos = |row: usize, col: usize| blocks[row].binary_search(&col).unwrap();
    let diag_block = (0..ne).map(|e| pos(e, e)).collect();
    let face_blocks = mesh
        .faces()
        .iter()
        .map(|f| {
            let m = f.minus.unwrap_or(f.plus);
            let sides = [f.plus, m];
            let mut out = [[(0, 0); 2]; 2];
            for (sv, &ev) in sides.iter().enumerate() {
                for (su, &eu) in sides.iter().enumerate() {
                    out[sv][su] = (ev, pos(ev, eu));
                }
            }
            out
        })
        .collect();
    OperatorPattern {
        row_ptr,
        col_idx,
        row_base,
        row_stride,
        diag_block,
        face_blocks,
    }
}
