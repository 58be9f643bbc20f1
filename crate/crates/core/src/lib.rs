//! Copulas, their Markov-kernel disintegration, partial vine copulas and
//! the distances used to compare them.
//!
//! Checkerboard copulas ([`GridCopula`]) are the exact finite objects; closed
//! form constructions are [`AnalyticCopula`] values. Axis indices are
//! 0-based throughout, and conditioning is on the last coordinate unless an
//! axis set is given explicitly.

#![allow(clippy::needless_range_loop)]

pub mod axis;
pub mod copula;
pub mod disintegration;
pub mod error;
pub mod families;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod pvc;
pub mod pwl;
pub mod quadrature;

pub use axis::Axis;
pub use copula::{AnalyticCopula, ClosedFormConditional, Copula, Regularity};
pub use error::{CopulaError, Result};
pub use grid::{common_refinement, convex_combine, empirical_copula, GridCopula};
pub use pwl::PiecewiseLinearCdf;
