use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::GeneratingVector;

use super::PodWeights;

/// `B_2(x) = x^2 - x + 1/6`.
#[inline]
fn bernoulli2(x: f64) -> f64 {
    x * x - x + 1.0 / 6.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbcOptions {
    /// Highest subset order kept in the POD recursion.
    pub max_order: usize,
    /// Upper limit on `n * s * max_order`.
    pub capacity: u64,
}

impl Default for CbcOptions {
    fn default() -> Self {
        Self {
            max_order: 8,
            capacity: 1 << 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CbcResult {
    pub vector: GeneratingVector,
    /// Squared shift-averaged worst-case error after each component.
    pub errors_sq: Vec<f64>,
}

/// Table `omega[k] = B_2(k/n)`, symmetric in `k <-> n - k`.
fn kernel_table(n: usize) -> Vec<f64> {
    let mut omega = vec![0.0; n];
    for k in 0..=n / 2 {
        let v = bernoulli2(k as f64 / n as f64);
        omega[k] = v;
        omega[(n - k) % n] = v;
    }
    omega
}

fn check_inputs(n: u64, s: usize, weights: &PodWeights, opts: &CbcOptions) -> Result<()> {
    if n == 0 || !n.is_power_of_two() {
        return invalid(format!("number of points must be a power of two, got {n}"));
    }
    if s == 0 || s > weights.dim() {
        return invalid(format!("dimension {s} must lie in 1..={}", weights.dim()));
    }
    if opts.max_order == 0 {
        return invalid("POD truncation order must be positive");
    }
    let work = (n as u128) * (s as u128) * (opts.max_order as u128);
    if work > opts.capacity as u128 {
        return Err(Error::Validation(format!(
            "CBC problem size n*s*q = {work} exceeds the configured capacity {}",
            opts.capacity
        )));
    }
    Ok(())
}

/// Component-by-component construction of a rank-1 lattice rule with `n`
/// points minimizing the shift-averaged worst-case error for POD weights
/// in the unanchored Sobolev space.
///
/// Each component is chosen among the odd residues; among candidates whose
/// error agrees with the minimum to a relative `1e-12`, the smallest wins.
pub fn cbc_construct(n: u64, s: usize, weights: &PodWeights, opts: &CbcOptions) -> Result<CbcResult> {
    check_inputs(n, s, weights, opts)?;
    let nn = n as usize;
    let q = opts.max_order;
    let omega = kernel_table(nn);
    let gamma: Vec<f64> = (0..=q).map(|l| weights.order_weight(l)).collect();

    // p[l][i] = sum over |u| = l of prod_{j in u} w_j B_2({i z_j / n})
    let mut p = vec![vec![0.0; nn]; q + 1];
    p[0].iter_mut().for_each(|v| *v = 1.0);
    let mut z = Vec::with_capacity(s);
    let mut errors_sq = Vec::with_capacity(s);
    let mut base = 0.0;
    for d in 0..s {
        let w = weights.product_weight(d);
        let top = (d + 1).min(q);
        let coeff: Vec<f64> = (0..nn)
            .map(|i| (1..=top).map(|l| gamma[l] * p[l - 1][i]).sum())
            .collect();
        let zd = if nn == 1 {
            0
        } else {
            let errs: Vec<f64> = (0..nn / 2)
                .into_par_iter()
                .map(|c| {
                    let cand = 2 * c + 1;
                    let mut acc = 0.0;
                    let mut k = 0usize;
                    for qi in &coeff {
                        acc += omega[k] * qi;
                        k += cand;
                        if k >= nn {
                            k -= nn;
                        }
                    }
                    acc
                })
                .collect();
            let best = errs.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = 1e-12 * best.abs();
            let c = errs.iter().position(|&e| e <= best + tol).unwrap();
            (2 * c + 1) as u64
        };
        // update recursion and error
        let mut add = 0.0;
        for i in 0..nn {
            add += omega[(i as u128 * zd as u128 % n as u128) as usize] * coeff[i];
        }
        base += w * add / n as f64;
        errors_sq.push(base);
        for l in (1..=top).rev() {
            for i in 0..nn {
                let b = omega[(i as u128 * zd as u128 % n as u128) as usize];
                p[l][i] += w * b * p[l - 1][i];
            }
        }
        z.push(zd);
    }
    Ok(CbcResult {
        vector: GeneratingVector::new(z, n)?,
        errors_sq,
    })
}

/// `e^2(z) = sum_{u != {}} gamma_u (1/n) sum_i prod_{j in u} B_2({i z_j / n})`
/// through the POD order recursion truncated at `max_order`.
pub fn worst_case_error_sq(z: &[u64], n: u64, weights: &PodWeights, max_order: usize) -> Result<f64> {
    if n == 0 {
        return invalid("number of points must be positive");
    }
    if z.len() > weights.dim() {
        return invalid("generating vector longer than the weight sequence");
    }
    let nn = n as usize;
    let omega = kernel_table(nn);
    let q = max_order.max(1);
    let mut total = 0.0;
    let mut p = vec![0.0; q + 1];
    for i in 0..nn {
        p.iter_mut().for_each(|v| *v = 0.0);
        p[0] = 1.0;
        for (j, &zj) in z.iter().enumerate() {
            let b = weights.product_weight(j) * omega[(i as u128 * zj as u128 % n as u128) as usize];
            for l in (1..=q).rev() {
                p[l] += b * p[l - 1];
            }
        }
        total += (1..=q).map(|l| weights.order_weight(l) * p[l]).sum::<f64>();
    }
    Ok(total / n as f64)
}
