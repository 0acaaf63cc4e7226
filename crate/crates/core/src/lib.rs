//! Numerical toolkit for certifying that Reeb flows on the three-sphere are
//! right-handed.
//!
//! Two model classes are covered: geodesic flows of ellipsoids of revolution,
//! lifted to S³ through the double cover of the unit tangent bundle, and
//! Hamiltonian flows on boundaries of smooth convex bodies in ℝ⁴.

pub mod certify;
pub mod convex4d;
pub mod error;
pub mod flow_engine;
pub mod geometry2d;
pub mod lift_s3;
pub mod report;
pub mod sections_linking;

pub use error::{Error, Result};

/// Version string embedded in every certificate.
pub const TOOL_VERSION: &str = concat!("reeb-core ", env!("CARGO_PKG_VERSION"));
