//! Interior penalty discontinuous Galerkin discretization.

mod assembly;
mod conforming;
mod norms;
mod penalty;
mod space;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use assembly::{
    assemble_ipdg, assemble_load, assemble_operator, solve_system, AssembledSystem, CoefficientValues,
    SOLVE_TOLERANCE,
};
pub use conforming::{solve_conforming_p1, ConformingP1, NodalFunction};
pub use norms::{dg_norm, dg_star_norm, l2_error, l2_norm, l2_norm_sq, norm_parts, NormParts, Reference};
pub use penalty::{penalty_for_sample, penalty_value, trace_constant_sq, Penalty, PenaltyPolicy};
pub use space::{local_dim, DgFunction, DgSpace};

/// Symmetrization parameter of the interior penalty family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Theta {
    /// `theta = -1`
    Symmetric,
    /// `theta = 0`
    Incomplete,
    /// `theta = +1`
    NonSymmetric,
}

impl Theta {
    pub fn value(self) -> f64 {
        match self {
            Theta::Symmetric => -1.0,
            Theta::Incomplete => 0.0,
            Theta::NonSymmetric => 1.0,
        }
    }
}

impl TryFrom<i64> for Theta {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Theta::Symmetric),
            0 => Ok(Theta::Incomplete),
            1 => Ok(Theta::NonSymmetric),
            _ => invalid(format!("theta must be -1, 0 or 1, got {v}")),
        }
    }
}

impl From<Theta> for i64 {
    fn from(t: Theta) -> i64 {
        t.value() as i64
    }
}

impl std::fmt::Display for Theta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Theta::Symmetric => "SIPG",
            Theta::Incomplete => "IIPG",
            Theta::NonSymmetric => "NIPG",
        })
    }
}

impl DgFunction {
    /// One coefficient per line, element by element.
    pub fn write_dump<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for c in &self.coeffs {
            writeln!(w, "{c:e}")?;
        }
        Ok(())
    }
}
