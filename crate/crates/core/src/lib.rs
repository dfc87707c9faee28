//! Expected solutions of elliptic diffusion problems with random coefficients.
//!
//! The crate couples interior penalty discontinuous Galerkin (IPDG)
//! discretizations on triangulations of the unit square with randomly
//! shifted rank-1 lattice rules over the parameter space:
//!
//! - [`field`]: affine-uniform and lognormal coefficient models built on an
//!   ordered sine-product expansion.
//! - [`mesh`]: structured triangulations with face topology.
//! - [`dg`]: IPDG assembly (SIPG/IIPG/NIPG), penalty policies, DG norms,
//!   and a conforming P1 comparison solver.
//! - [`lattice`]: lattice points, random shifts, normal transforms and the
//!   shift-averaged estimator.
//! - [`theory`]: POD weights, the CBC construction and the parametric
//!   regularity bounds used to derive them.
//! - [`experiment`]: convergence studies and plot-ready tables.

pub mod dg;
pub mod error;
pub mod experiment;
pub mod field;
pub mod lattice;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod special;
pub mod theory;

pub use dg::{DgFunction, DgSpace, Theta};
pub use error::{Error, Result};
pub use experiment::{ConvergenceReport, ExperimentConfig};
pub use field::{CoefficientModel, ParameterVector, RandomFieldSpec};
pub use lattice::{GeneratingVector, SampleMatrix, ShiftSet};
pub use mesh::Mesh;
pub use theory::PodWeights;
