use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Result};
use crate::field::{CoefficientModel, RandomFieldSpec};
use crate::mesh::{Mesh, FACES_PER_ELEMENT};

use super::Theta;

/// How the penalty parameter is chosen.
///
/// In configuration files this is either the string `"analytic"` or a
/// positive number.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PenaltyPolicy {
    /// `a_max^2 / a_min` for the affine model,
    /// `max{exp(sum 3 b_j |y_j|), min a0 exp(-sum b_j |y_j|)}` for the lognormal one.
    Analytic,
    Constant(f64),
}

impl PenaltyPolicy {
    pub fn validate(self) -> Result<Self> {
        match self {
            PenaltyPolicy::Constant(eta) if !(eta > 0.0 && eta.is_finite()) => {
                invalid(format!("penalty override must be positive, got {eta}"))
            }
            p => Ok(p),
        }
    }
}

impl std::fmt::Display for PenaltyPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PenaltyPolicy::Analytic => f.write_str("analytic"),
            PenaltyPolicy::Constant(eta) => write!(f, "{eta}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PolicyRepr {
    Number(f64),
    Name(String),
}

impl Serialize for PenaltyPolicy {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            PenaltyPolicy::Analytic => PolicyRepr::Name("analytic".into()),
            PenaltyPolicy::Constant(eta) => PolicyRepr::Number(eta),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PenaltyPolicy {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match PolicyRepr::deserialize(d)? {
            PolicyRepr::Number(eta) => PenaltyPolicy::Constant(eta)
                .validate()
                .map_err(|e| D::Error::custom(e.to_string())),
            PolicyRepr::Name(n) if n == "analytic" => Ok(PenaltyPolicy::Analytic),
            PolicyRepr::Name(n) => Err(D::Error::custom(format!(
                "penalty must be \"analytic\" or a positive number, got \"{n}\""
            ))),
        }
    }
}

/// A penalty value together with the stability threshold it was checked against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Penalty {
    pub eta: f64,
    /// `tau a_max^2 C_tr^2 N (theta - 1)^2 / (4 a_min)`; zero for NIPG.
    pub threshold: f64,
}

impl Penalty {
    pub fn below_threshold(&self) -> bool {
        self.eta < self.threshold
    }
}

/// Discrete inverse-trace constant estimate
/// `C_tr^2 = max_T max_{F in T} (k+1)(k+2) h_T |F| / (2 |T|)`.
pub fn trace_constant_sq(mesh: &Mesh, degree: usize) -> f64 {
    let kk = ((degree + 1) * (degree + 2)) as f64;
    (0..mesh.num_elements())
        .map(|e| {
            let fmax = mesh
                .element_faces(e)
                .iter()
                .map(|&f| mesh.faces()[f].length)
                .fold(0.0, f64::max);
            kk * mesh.diameter(e) * fmax / (2.0 * mesh.area(e))
        })
        .fold(0.0, f64::max)
}

/// Penalty for sample `y`, without emitting warnings.
pub fn penalty_for_sample(
    policy: PenaltyPolicy,
    spec: &RandomFieldSpec,
    y: &[f64],
    theta: Theta,
    trace_sq: f64,
    tau: f64,
) -> Result<Penalty> {
    if y.len() != spec.dim() {
        return invalid(format!(
            "parameter of length {} for dimension {}",
            y.len(),
            spec.dim()
        ));
    }
    let (a_min, a_max) = spec.bounds_unchecked(y);
    if !(a_min > 0.0) {
        return Err(crate::error::Error::ModelViolation(format!(
            "coefficient lower bound {a_min} is not positive"
        )));
    }
    let eta = match policy.validate()? {
        PenaltyPolicy::Constant(eta) => eta,
        PenaltyPolicy::Analytic => match spec.model() {
            CoefficientModel::Affine => a_max * a_max / a_min,
            CoefficientModel::Lognormal => {
                let s: f64 = spec
                    .basis()
                    .iter()
                    .zip(y)
                    .map(|(t, yj)| t.amplitude * yj.abs())
                    .sum();
                (3.0 * s).exp().max(spec.base().min() * (-s).exp())
            }
        },
    };
    let t = theta.value() - 1.0;
    let threshold = tau * a_max * a_max * trace_sq * FACES_PER_ELEMENT as f64 * t * t / (4.0 * a_min);
    Ok(Penalty { eta, threshold })
}

/// [`penalty_for_sample`] with a warning when `eta` falls below the
/// coercivity threshold.
pub fn penalty_value(
    policy: PenaltyPolicy,
    spec: &RandomFieldSpec,
    y: &[f64],
    theta: Theta,
    trace_sq: f64,
    tau: f64,
) -> Result<Penalty> {
    let p = penalty_for_sample(policy, spec, y, theta, trace_sq, tau)?;
    if p.below_threshold() {
        log::warn!(
            "penalty {} is below the coercivity threshold {:.4} for {theta}; the solve may be unstable",
            p.eta,
            p.threshold
        );
    }
    Ok(p)
}
