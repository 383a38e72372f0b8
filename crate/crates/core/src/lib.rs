//! Travelling equilibria of a phenotype distribution tracking a linearly moving
//! optimum, for asexual (mutation kernel) and infinitesimal sexual reproduction.
//!
//! All computations run in scaled units; [`scaling`] converts at the boundaries.

pub mod asymptotics;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod kernels;
pub mod report;
pub mod scaling;
pub mod selection;
pub mod simulator;

pub use error::{Error, Result};
pub use grid::Grid;
pub use kernels::Kernel;
pub use report::{EquilibriumReport, Order, Source};
pub use scaling::{ModelParams, Mode, ScaledParams};
pub use selection::Selection;
