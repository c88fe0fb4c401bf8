//! Optimal orientation design for hybrid TOA-RSS-AOA sensor networks.
//!
//! The crate computes sensor orientations around a target that minimize the
//! A-, D- or E-optimal criterion of the Cramer-Rao lower bound, using a
//! primal-dual majorization-minimization solver, and validates designs with a
//! maximum-likelihood Monte-Carlo harness.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod fim;
pub mod geometry;
pub mod linalg;
pub mod mm;
pub mod models;
pub mod oracle;
pub mod problem;

pub use error::{Error, Result};
pub use fim::{criterion_value, hybrid_fim, Criterion, FimResult, HybridForm};
pub use geometry::{DistanceProfile, Orientation, TargetSensorConfig};
pub use models::{ModelConstants, NoiseModel};
pub use problem::DesignProblem;
