//! Pseudo-Hermitian geometry on coordinate charts, generalized Fefferman
//! metrics, conformal tractor calculus and a numerical verification harness.
//!
//! All differential quantities are computed with truncated Taylor jets
//! ([`jet::Jet`]), so curvature of any order is exact to rounding.

pub mod algebra;
pub mod checks;
pub mod cr;
pub mod error;
pub mod examples;
pub mod fefferman;
pub mod fields;
pub mod jet;
pub mod metric;
pub mod report;
pub mod tractor;
pub mod webster;

pub use error::GeomError;
pub use jet::Jet;
