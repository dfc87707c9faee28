//! POD weights for the lattice rule error bounds, the constants they are
//! built from, and the parametric regularity bounds behind them.

mod cbc;

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{CoefficientModel, RandomFieldSpec};
use crate::special::{normal_cdf, riemann_zeta};

pub use cbc::{cbc_construct, worst_case_error_sq, CbcOptions, CbcResult};

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.5 && lambda <= 1.0) {
        return invalid(format!("lambda must lie in (1/2, 1], got {lambda}"));
    }
    Ok(())
}

/// `rho(lambda) = 2 zeta(2 lambda) / (2 pi^2)^lambda`.
pub fn varrho_uniform(lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(2.0 * riemann_zeta(2.0 * lambda)? / (2.0 * PI * PI).powf(lambda))
}

/// `rho_j(lambda) = 2 (sqrt(2 pi) exp(alpha^2 / e) / (pi^(2 - 2e) (1 - e) e))^lambda zeta(lambda + 1/2)`
/// with `e = (2 lambda - 1) / (4 lambda)`.
pub fn varrho_lognormal(lambda: f64, alpha: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    let e = (2.0 * lambda - 1.0) / (4.0 * lambda);
    let base = (2.0 * PI).sqrt() * (alpha * alpha / e).exp() / (PI.powf(2.0 - 2.0 * e) * (1.0 - e) * e);
    Ok(2.0 * base.powf(lambda) * riemann_zeta(lambda + 0.5)?)
}

/// `lambda = p / (2 - p)` for `p in (2/3, 1)`, `1 / (2 - 2 eps)` for `p <= 2/3`.
pub fn lambda_from_p(p: f64, eps: Option<f64>) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return invalid(format!("summability exponent p must lie in (0, 1), got {p}"));
    }
    if p > 2.0 / 3.0 {
        return Ok(p / (2.0 - p));
    }
    match eps {
        Some(e) if e > 0.0 && e < 0.5 => Ok(1.0 / (2.0 - 2.0 * e)),
        Some(e) => invalid(format!("epsilon must lie in (0, 1/2), got {e}")),
        None => invalid(format!("p = {p} <= 2/3 requires an epsilon")),
    }
}

/// Product-and-order-dependent weights
/// `gamma_u = (|u|! prod_{j in u} b_j)^(2 / (1 + lambda))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PodWeights {
    product: Vec<f64>,
    lambda: f64,
}

impl PodWeights {
    /// Per-dimension factors must be nonnegative; zero marks an inactive dimension.
    pub fn new(product: Vec<f64>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if let Some(b) = product.iter().find(|b| !(**b >= 0.0 && b.is_finite())) {
            return invalid(format!("weight factors must be nonnegative and finite, got {b}"));
        }
        Ok(Self { product, lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn exponent(&self) -> f64 {
        2.0 / (1.0 + self.lambda)
    }

    pub fn dim(&self) -> usize {
        self.product.len()
    }

    /// The factors `b_j` before exponentiation.
    pub fn factors(&self) -> &[f64] {
        &self.product
    }

    /// `(l!)^(2 / (1 + lambda))`.
    pub fn order_weight(&self, l: usize) -> f64 {
        (self.exponent() * ln_factorial(l)).exp()
    }

    /// `b_j^(2 / (1 + lambda))` for the 0-based dimension `j`.
    pub fn product_weight(&self, j: usize) -> f64 {
        self.product[j].powf(self.exponent())
    }

    /// `gamma_u` for a set of distinct 0-based dimensions.
    pub fn gamma(&self, u: &[usize]) -> Result<f64> {
        let mut seen = u.to_vec();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != u.len() {
            return invalid("subset has repeated dimensions");
        }
        if let Some(j) = u.iter().find(|&&j| j >= self.dim()) {
            return invalid(format!("dimension {j} out of range for {} weights", self.dim()));
        }
        if u.iter().any(|&j| self.product[j] == 0.0) {
            return Ok(0.0);
        }
        let ln: f64 = ln_factorial(u.len()) + u.iter().map(|&j| self.product[j].ln()).sum::<f64>();
        Ok((self.exponent() * ln).exp())
    }
}

fn ln_factorial(l: usize) -> f64 {
    (2..=l).map(|k| (k as f64).ln()).sum()
}

/// Analytic constants that enter the weights and the regularity bounds.
/// None of them is known explicitly; all default to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityConstants {
    pub c_dg: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub c_poincare: f64,
}

impl Default for RegularityConstants {
    fn default() -> Self {
        Self {
            c_dg: 1.0,
            alpha: 1.0,
            sigma: 1.0,
            c_poincare: 1.0,
        }
    }
}

impl RegularityConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_dg", self.c_dg),
            ("alpha", self.alpha),
            ("sigma", self.sigma),
            ("c_poincare", self.c_poincare),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("constant {name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// `b_j = C_DG ||psi_j||_inf / (alpha a_min)` for the affine model.
pub fn affine_factors(spec: &RandomFieldSpec, c: &RegularityConstants) -> Result<Vec<f64>> {
    if spec.model() != CoefficientModel::Affine {
        return invalid("affine factors require the affine model");
    }
    c.validate()?;
    let (a_min, _) = spec.bounds_unchecked(&vec![0.0; spec.dim()]);
    Ok(spec
        .basis()
        .iter()
        .map(|t| c.c_dg * t.sup_norm() / (c.alpha * a_min))
        .collect())
}

/// POD weights with factors `b_j / sqrt(rho(lambda))`.
pub fn weights_affine(b: &[f64], lambda: f64) -> Result<PodWeights> {
    let r = varrho_uniform(lambda)?.sqrt();
    PodWeights::new(b.iter().map(|bj| bj / r).collect(), lambda)
}

/// `alpha_j = (beta + sqrt(beta^2 + 1 - 1/(2 lambda))) / 2`, never below
/// `beta (1 + 1e-6)` so that `alpha_j - beta_j` stays resolvable.
pub fn alpha_lognormal(beta: f64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    if !(beta >= 0.0 && beta.is_finite()) {
        return invalid(format!("beta must be nonnegative, got {beta}"));
    }
    let alpha = 0.5 * (beta + (beta * beta + 1.0 - 0.5 / lambda).sqrt());
    let floor = beta * (1.0 + 1e-6);
    if alpha < floor {
        log::warn!("alpha {alpha} too close to beta {beta}; lifted to {floor}");
        return Ok(floor);
    }
    Ok(alpha)
}

/// POD weights with factors
/// `beta_j / (2 ln 2 exp(beta_j^2 / 2) Phi(beta_j) sqrt((alpha_j - beta_j) rho_j(lambda)))`.
pub fn weights_lognormal(beta: &[f64], lambda: f64) -> Result<PodWeights> {
    let factors = beta
        .iter()
        .map(|&b| -> Result<f64> {
            if b == 0.0 {
                return Ok(0.0);
            }
            let alpha = alpha_lognormal(b, lambda)?;
            if !(alpha - b > 0.0) {
                return Err(Error::Numerical(format!(
                    "alpha - beta = {} is not positive",
                    alpha - b
                )));
            }
            let rho = varrho_lognormal(lambda, alpha)?;
            Ok(b / (2.0 * LN_2 * (0.5 * b * b).exp() * normal_cdf(b) * ((alpha - b) * rho).sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    PodWeights::new(factors, lambda)
}

/// Weights for a field spec: `lambda` from `p = 1/decay + slack`, then the
/// model's weight formula with the given constants.
pub fn weights_for_spec(spec: &RandomFieldSpec, slack: f64, c: &RegularityConstants) -> Result<PodWeights> {
    let p = 1.0 / spec.decay() + slack;
    let lambda = lambda_from_p(p, Some(0.25))?;
    match spec.model() {
        CoefficientModel::Affine => weights_affine(&affine_factors(spec, c)?, lambda),
        CoefficientModel::Lognormal => weights_lognormal(&spec.amplitudes(), lambda),
    }
}

/// Ordered Bell (Fubini) numbers `L_k = sum_{l=1..k} C(k, l) L_{k-l}`, `L_0 = 1`.
pub fn ordered_bell(k: usize) -> Result<u128> {
    let overflow = || Error::Numerical(format!("ordered Bell number of order {k} overflows 128 bits"));
    let mut table: Vec<u128> = vec![1];
    let mut binom: Vec<u128> = vec![1];
    for m in 1..=k {
        // binomial row m
        let mut next = vec![1u128; m + 1];
        for l in 1..m {
            next[l] = binom[l - 1].checked_add(binom[l]).ok_or_else(overflow)?;
        }
        binom = next;
        let mut sum: u128 = 0;
        for l in 1..=m {
            let t = binom[l].checked_mul(table[m - l]).ok_or_else(overflow)?;
            sum = sum.checked_add(t).ok_or_else(overflow)?;
        }
        table.push(sum);
    }
    Ok(table[k])
}

/// `k! / (ln 2)^k`.
pub fn ordered_bell_bound(k: usize) -> f64 {
    (ln_factorial(k) - k as f64 * LN_2.ln()).exp()
}

/// Which regularity estimate to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegularitySetting {
    Affine,
    /// First-order derivatives only (`max nu_j <= 1`).
    LognormalFirstOrder,
}

/// A bound on `||d^nu u_h||` in the DG norm.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityBound {
    pub nu: Vec<u32>,
    pub value: f64,
    pub setting: RegularitySetting,
}

/// Affine: `|nu|! b^nu (C_Poin / alpha) ||f||`.
/// Lognormal: `C_DG^|nu| 4^|nu| |nu|! / (ln 2)^|nu| beta^nu sigma / (alpha sqrt(a_min(y))) ||f||`.
pub fn regularity_bound(
    setting: RegularitySetting,
    nu: &[u32],
    spec: &RandomFieldSpec,
    y: Option<&[f64]>,
    f_norm: f64,
    c: &RegularityConstants,
) -> Result<RegularityBound> {
    c.validate()?;
    if nu.len() > spec.dim() {
        return invalid(format!(
            "multi-index of length {} exceeds dimension {}",
            nu.len(),
            spec.dim()
        ));
    }
    if !(f_norm >= 0.0) {
        return invalid("source norm must be nonnegative");
    }
    let order: u32 = nu.iter().sum();
    let lnfact = ln_factorial(order as usize);
    let value = match setting {
        RegularitySetting::Affine => {
            let b = affine_factors(spec, c)?;
            let ln_bnu: f64 = nu.iter().zip(&b).map(|(&k, bj)| k as f64 * bj.ln()).sum();
            (lnfact + ln_bnu).exp() * c.c_poincare / c.alpha * f_norm
        }
        RegularitySetting::LognormalFirstOrder => {
            if spec.model() != CoefficientModel::Lognormal {
                return invalid("lognormal bound requires the lognormal model");
            }
            if nu.iter().any(|&k| k > 1) {
                return invalid("lognormal regularity bound covers first-order derivatives only");
            }
            let y = y.ok_or_else(|| Error::Validation("lognormal bound needs a parameter sample".into()))?;
            if y.len() != spec.dim() {
                return invalid(format!(
                    "parameter of length {} for dimension {}",
                    y.len(),
                    spec.dim()
                ));
            }
            let (a_min, _) = spec.bounds_unchecked(y);
            let beta = spec.amplitudes();
            let k = order as f64;
            let ln_bnu: f64 = nu
                .iter()
                .zip(&beta)
                .filter(|(&n, _)| n == 1)
                .map(|(_, b)| b.ln())
                .sum();
            (k * (c.c_dg.ln() + 4f64.ln() - LN_2.ln()) + lnfact + ln_bnu).exp() * c.sigma
                / (c.alpha * a_min.sqrt())
                * f_norm
        }
    };
    Ok(RegularityBound {
        nu: nu.to_vec(),
        value,
        setting,
    })
}
