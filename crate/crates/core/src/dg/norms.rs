use crate::error::Result;
use crate::quadrature::TriangleRule;

use super::assembly::CoefficientValues;
use super::space::{DgFunction, DgSpace};

/// The three sums making up the DG norms:
/// `gradient = sum_T ||sqrt(a) grad v||^2`, `jump = sum_F (eta/h_F) ||[v]||^2`
/// and `flux = sum_F (h_F/eta) ||{a grad v}||^2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormParts {
    pub gradient: f64,
    pub jump: f64,
    pub flux: f64,
}

pub fn norm_parts(space: &DgSpace, u: &DgFunction, coeff: &CoefficientValues, eta: f64) -> Result<NormParts> {
    space.check(u)?;
    let nb = space.local_dim();
    let c = &u.coeffs;
    let mut gradient = 0.0;
    for e in 0..space.mesh().num_elements() {
        let ce = &c[e * nb..(e + 1) * nb];
        for q in 0..space.nqv {
            let k = (e * space.nqv + q) * nb;
            let g = grad_at(&space.vol_grad[k..k + nb], ce);
            gradient += space.vol_weights[e * space.nqv + q]
                * coeff.volume(space, e, q)
                * (g[0] * g[0] + g[1] * g[1]);
        }
    }
    let (mut jump, mut flux) = (0.0, 0.0);
    for (f, face) in space.mesh().faces().iter().enumerate() {
        let (mut jf, mut ff) = (0.0, 0.0);
        let cp = &c[face.plus * nb..(face.plus + 1) * nb];
        for q in 0..space.nqf {
            let k = (f * space.nqf + q) * nb;
            let w = space.face_weights[f * space.nqf + q];
            let a = coeff.face(space, f, q);
            let up = dot(&space.face_phi[0][k..k + nb], cp);
            let gp = grad_at(&space.face_grad[0][k..k + nb], cp);
            let (j, avg) = match face.minus {
                None => (up, gp),
                Some(m) => {
                    let cm = &c[m * nb..(m + 1) * nb];
                    let um = dot(&space.face_phi[1][k..k + nb], cm);
                    let gm = grad_at(&space.face_grad[1][k..k + nb], cm);
                    (up - um, [0.5 * (gp[0] + gm[0]), 0.5 * (gp[1] + gm[1])])
                }
            };
            jf += w * j * j;
            ff += w * a * a * (avg[0] * avg[0] + avg[1] * avg[1]);
        }
        jump += eta / face.length * jf;
        flux += face.length / eta * ff;
    }
    Ok(NormParts { gradient, jump, flux })
}

/// `||v||_{V_h}`.
pub fn dg_norm(space: &DgSpace, u: &DgFunction, coeff: &CoefficientValues, eta: f64) -> Result<f64> {
    let p = norm_parts(space, u, coeff, eta)?;
    Ok((p.gradient + p.jump).sqrt())
}

/// `||v||_{V*_h}`, the `V_h` norm plus the scaled average flux.
pub fn dg_star_norm(space: &DgSpace, u: &DgFunction, coeff: &CoefficientValues, eta: f64) -> Result<f64> {
    let p = norm_parts(space, u, coeff, eta)?;
    Ok((p.gradient + p.jump + p.flux).sqrt())
}

/// Exact `L^2` norm (the mass matrix is exact for the polynomial basis).
pub fn l2_norm(space: &DgSpace, u: &DgFunction) -> Result<f64> {
    Ok(l2_norm_sq(space, u)?.sqrt())
}

pub fn l2_norm_sq(space: &DgSpace, u: &DgFunction) -> Result<f64> {
    space.check(u)?;
    let nb = space.local_dim();
    let mut s = 0.0;
    for e in 0..space.mesh().num_elements() {
        let m = space.element_mass(e);
        let ce = &u.coeffs[e * nb..(e + 1) * nb];
        for i in 0..nb {
            s += ce[i] * dot(&m[i * nb..(i + 1) * nb], ce);
        }
    }
    Ok(s)
}

/// Reference for [`l2_error`].
pub enum Reference<'a> {
    Discrete(&'a DgFunction),
    Analytic(&'a dyn Fn([f64; 2]) -> f64),
}

/// Points per direction of the collapsed Gauss rule used against analytic references.
const ANALYTIC_RULE_POINTS: usize = 8;

/// `||u - v||_{L^2(D)}`; analytic references are integrated with a 64-point
/// rule per element.
pub fn l2_error(space: &DgSpace, u: &DgFunction, v: Reference<'_>) -> Result<f64> {
    space.check(u)?;
    match v {
        Reference::Discrete(v) => {
            space.check(v)?;
            let d = DgFunction {
                coeffs: u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a - b).collect(),
            };
            l2_norm(space, &d)
        }
        Reference::Analytic(f) => {
            let rule = TriangleRule::collapsed_gauss(ANALYTIC_RULE_POINTS);
            let mut s = 0.0;
            for e in 0..space.mesh().num_elements() {
                let jac = 2.0 * space.mesh().area(e);
                for (&r, &w) in rule.points.iter().zip(&rule.weights) {
                    let d = space.eval_local(u, e, r) - f(space.from_reference(e, r));
                    s += w * jac * d * d;
                }
            }
            Ok(s.sqrt())
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn grad_at(g: &[[f64; 2]], c: &[f64]) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (gi, ci) in g.iter().zip(c) {
        out[0] += ci * gi[0];
        out[1] += ci * gi[1];
    }
    out
}
