//! Parametric diffusion coefficients.
//!
//! Both models share the expansion terms
//! `psi_j(x) = beta_j sin(k_j pi x_1) sin(l_j pi x_2)` with amplitudes
//! `beta_j = (k_j^2 + l_j^2)^(-decay)`:
//!
//! - affine: `a(x, y) = a0(x) + sum_j y_j psi_j(x)`, `y_j` uniform on `[-1/2, 1/2]`;
//! - lognormal: `a(x, y) = a0(x) exp(sum_j y_j psi_j(x))`, `y_j` standard normal.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientModel {
    Affine,
    Lognormal,
}

impl CoefficientModel {
    /// Base field value used by the reference experiments.
    pub fn default_a0(self) -> f64 {
        match self {
            CoefficientModel::Affine => 5.0,
            CoefficientModel::Lognormal => 1.0,
        }
    }

    pub fn parameter_domain(self) -> ParameterDomain {
        match self {
            CoefficientModel::Affine => ParameterDomain::UnitBox,
            CoefficientModel::Lognormal => ParameterDomain::RealLine,
        }
    }
}

impl fmt::Display for CoefficientModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoefficientModel::Affine => f.write_str("affine"),
            CoefficientModel::Lognormal => f.write_str("lognormal"),
        }
    }
}

/// One sine-product term of the expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisTerm {
    pub k: u32,
    pub l: u32,
    /// `(k^2 + l^2)^(-decay)`, which is also the sup-norm of the term.
    pub amplitude: f64,
}

impl BasisTerm {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.amplitude * (self.k as f64 * PI * x[0]).sin() * (self.l as f64 * PI * x[1]).sin()
    }

    pub fn sup_norm(&self) -> f64 {
        self.amplitude
    }
}

/// Returns the first `s` terms of `Z+ x Z+` ordered by `k^2 + l^2`, ties
/// broken lexicographically in `(k, l)`.
pub fn order_basis(s: usize, decay: f64) -> Result<Vec<BasisTerm>> {
    if s == 0 {
        return invalid("truncation dimension s must be positive");
    }
    if !(decay > 1.0) || !decay.is_finite() {
        return invalid(format!("decay must be finite and > 1, got {decay}"));
    }
    // Grow the radius until the disc holds at least s lattice points.
    let mut r2: u64 = 2;
    loop {
        let r = (r2 as f64).sqrt().floor() as u64;
        let mut pairs: Vec<(u64, u32, u32)> = Vec::new();
        for k in 1..=r {
            for l in 1..=r {
                let n2 = k * k + l * l;
                if n2 <= r2 {
                    pairs.push((n2, k as u32, l as u32));
                }
            }
        }
        if pairs.len() >= s {
            pairs.sort_unstable();
            return Ok(pairs
                .into_iter()
                .take(s)
                .map(|(n2, k, l)| BasisTerm {
                    k,
                    l,
                    amplitude: (n2 as f64).powf(-decay),
                })
                .collect());
        }
        r2 *= 2;
    }
}

/// The deterministic part `a0` of the coefficient.
#[derive(Clone)]
pub enum BaseField {
    Constant(f64),
    /// A user function together with its extrema over the closed square.
    Function {
        f: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
        min: f64,
        max: f64,
    },
}

impl BaseField {
    #[inline]
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        match self {
            BaseField::Constant(c) => *c,
            BaseField::Function { f, .. } => f(x),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            BaseField::Constant(c) => *c,
            BaseField::Function { min, .. } => *min,
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            BaseField::Constant(c) => *c,
            BaseField::Function { max, .. } => *max,
        }
    }
}

impl fmt::Debug for BaseField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseField::Constant(c) => write!(f, "Constant({c})"),
            BaseField::Function { min, max, .. } => {
                write!(f, "Function {{ min: {min}, max: {max} }}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParameterDomain {
    /// `[-1/2, 1/2]^s`
    UnitBox,
    /// `R^s`
    RealLine,
}

/// A truncated parameter vector `y` tagged with its domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector {
    values: Vec<f64>,
    domain: ParameterDomain,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, domain: ParameterDomain) -> Result<Self> {
        for (j, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return invalid(format!("parameter y[{j}] is not finite"));
            }
            if domain == ParameterDomain::UnitBox && !(-0.5..=0.5).contains(&v) {
                return invalid(format!("parameter y[{j}] = {v} outside [-1/2, 1/2]"));
            }
        }
        Ok(Self { values, domain })
    }

    pub fn zeros(s: usize, domain: ParameterDomain) -> Self {
        Self {
            values: vec![0.0; s],
            domain,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn domain(&self) -> ParameterDomain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Coefficient model, base field and truncated expansion.
#[derive(Clone, Debug)]
pub struct RandomFieldSpec {
    model: CoefficientModel,
    base: BaseField,
    decay: f64,
    basis: Vec<BasisTerm>,
}

impl RandomFieldSpec {
    /// Constant base field `a0`, `s` ordered terms with the given decay.
    pub fn new(model: CoefficientModel, a0: f64, decay: f64, s: usize) -> Result<Self> {
        Self::with_base(model, BaseField::Constant(a0), decay, s)
    }

    /// The reference configuration: `a0 = 5` (affine) or `1` (lognormal), decay 1.3.
    pub fn standard(model: CoefficientModel, s: usize) -> Result<Self> {
        Self::new(model, model.default_a0(), 1.3, s)
    }

    pub fn with_base(model: CoefficientModel, base: BaseField, decay: f64, s: usize) -> Result<Self> {
        let basis = order_basis(s, decay)?;
        let (lo, hi) = (base.min(), base.max());
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return invalid(format!("base field bounds [{lo}, {hi}] are not a valid range"));
        }
        match model {
            CoefficientModel::Affine => {
                let half_sum: f64 = 0.5 * basis.iter().map(|t| t.amplitude).sum::<f64>();
                if lo - half_sum <= 0.0 {
                    return Err(Error::ModelViolation(format!(
                        "affine coefficient not uniformly positive: min a0 - sum(beta)/2 = {}",
                        lo - half_sum
                    )));
                }
            }
            CoefficientModel::Lognormal => {
                if lo <= 0.0 {
                    return Err(Error::ModelViolation(format!(
                        "lognormal base field must be positive, min a0 = {lo}"
                    )));
                }
            }
        }
        Ok(Self {
            model,
            base,
            decay,
            basis,
        })
    }

    pub fn model(&self) -> CoefficientModel {
        self.model
    }

    pub fn base(&self) -> &BaseField {
        &self.base
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn basis(&self) -> &[BasisTerm] {
        &self.basis
    }

    /// Truncation dimension.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// The amplitude sequence `beta_j = ||psi_j||_inf`.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.basis.iter().map(|t| t.amplitude).collect()
    }

    fn check_parameter(&self, y: &ParameterVector) -> Result<()> {
        if y.len() != self.dim() {
            return invalid(format!(
                "parameter dimension {} does not match truncation dimension {}",
                y.len(),
                self.dim()
            ));
        }
        if y.domain() != self.model.parameter_domain() {
            return invalid(format!(
                "parameter domain {:?} does not match the {} model",
                y.domain(),
                self.model
            ));
        }
        Ok(())
    }

    /// `a(x, y)`.
    pub fn eval(&self, y: &ParameterVector, x: [f64; 2]) -> Result<f64> {
        self.check_parameter(y)?;
        Ok(self.eval_unchecked(y.values(), x))
    }

    pub(crate) fn eval_unchecked(&self, y: &[f64], x: [f64; 2]) -> f64 {
        let series: f64 = self.basis.iter().zip(y).map(|(t, &yj)| yj * t.eval(x)).sum();
        match self.model {
            CoefficientModel::Affine => self.base.eval(x) + series,
            CoefficientModel::Lognormal => self.base.eval(x) * series.exp(),
        }
    }

    /// Bounds `(a_min, a_max)` valid for all `x`.
    ///
    /// Affine bounds are global (`min a0 - sum beta/2`, `max a0 + sum beta/2`);
    /// lognormal bounds are the `y`-dependent envelopes
    /// `a0 exp(-+ sum |y_j| beta_j)`.
    pub fn bounds(&self, y: &ParameterVector) -> Result<(f64, f64)> {
        self.check_parameter(y)?;
        Ok(self.bounds_unchecked(y.values()))
    }

    pub(crate) fn bounds_unchecked(&self, y: &[f64]) -> (f64, f64) {
        match self.model {
            CoefficientModel::Affine => {
                let half: f64 = 0.5 * self.basis.iter().map(|t| t.amplitude).sum::<f64>();
                (self.base.min() - half, self.base.max() + half)
            }
            CoefficientModel::Lognormal => {
                let e: f64 = self
                    .basis
                    .iter()
                    .zip(y)
                    .map(|(t, yj)| t.amplitude * yj.abs())
                    .sum();
                (self.base.min() * (-e).exp(), self.base.max() * e.exp())
            }
        }
    }

    /// Precomputes the expansion at a fixed point set for repeated sampling.
    pub fn sampler(&self, points: &[[f64; 2]]) -> FieldSampler {
        let s = self.dim();
        let mut psi = Vec::with_capacity(points.len() * s);
        for &x in points {
            psi.extend(self.basis.iter().map(|t| t.eval(x)));
        }
        FieldSampler {
            model: self.model,
            s,
            base: points.iter().map(|&x| self.base.eval(x)).collect(),
            psi,
        }
    }
}

/// `a(., y)` evaluated at a fixed point set, e.g. all quadrature nodes of a mesh.
#[derive(Clone, Debug)]
pub struct FieldSampler {
    model: CoefficientModel,
    s: usize,
    base: Vec<f64>,
    // row-major, points x terms
    psi: Vec<f64>,
}

impl FieldSampler {
    pub fn num_points(&self) -> usize {
        self.base.len()
    }

    /// Writes `a(x_i, y)` into `out`; fails if any value is not strictly positive.
    pub fn values_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        if y.len() != self.s {
            return invalid(format!(
                "parameter dimension {} does not match truncation dimension {}",
                y.len(),
                self.s
            ));
        }
        assert_eq!(out.len(), self.base.len());
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.psi[i * self.s..(i + 1) * self.s];
            let series: f64 = row.iter().zip(y).map(|(p, yj)| p * yj).sum();
            let a = match self.model {
                CoefficientModel::Affine => self.base[i] + series,
                CoefficientModel::Lognormal => self.base[i] * series.exp(),
            };
            if !(a > 0.0) || !a.is_finite() {
                return Err(Error::ModelViolation(format!(
                    "coefficient value {a} at sample point {i} is not positive"
                )));
            }
            *o = a;
        }
        Ok(())
    }

    pub fn values(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.base.len()];
        self.values_into(y, &mut out)?;
        Ok(out)
    }
}
