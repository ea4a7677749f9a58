//! Toolkit for the functional equation `a(x) + b(y) = c(x + y) + d(x / y)` on `(0, ∞)`.
//!
//! Exact solution families, recovery of the seven solution constants from
//! tables corrupted on negligible sets, a characteristic-profile test for
//! semi-constant functions, and a simulation pipeline for the Lukacs
//! characterisation of the gamma law.

pub mod canonical;
pub mod digest;
pub mod error;
pub mod grid;
pub mod exceptional;
pub mod lattice;
pub mod lukacs;
pub mod pexider;
pub mod reduction;
pub mod semiconstant;
pub mod stats;
pub mod svg;

pub use canonical::{ComponentValues, GeneralSolutionSpec, OBParams};
pub use error::{Error, Result};
pub use grid::{GeometricGrid, GridFunction};
pub use stats::FitMode;
