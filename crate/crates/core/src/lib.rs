//! Finite-volume pricer for two-asset options on a uniform grid.
//!
//! The diffusion term is discretised with the L-method multi-point flux
//! approximation, convection with first- or second-order upwinding, and the
//! degenerate strips next to the axes optionally with fitted fluxes. Time is
//! marched with the θ-scheme; American options use a power penalty solved by
//! Newton's method.

pub mod assembly;
pub mod error;
pub mod fitted;
pub mod grid;
pub mod harness;
pub mod lcp;
pub mod linalg;
pub mod lmpfa;
pub mod model;
pub mod reference;
pub mod scalar;
pub mod stencil;
pub mod surface;
pub mod timestepper;
pub mod upwind;

pub use assembly::SchemeSelector;
pub use error::{PricerError, Result};
pub use scalar::Real;

/// Double-precision instantiations.
pub type Grid = grid::Grid2D<f64>;
pub type Problem = model::ProblemSpec<f64>;
pub type Surface = surface::PriceSurface<f64>;
pub type Operator = assembly::StencilOperator<f64>;
pub type Settings = timestepper::SolverSettings<f64>;
pub type Time = timestepper::TimeGrid<f64>;
