//! Finite element solver for the steady Navier-Stokes equations with a
//! variable power-law index `p(x)`.
//!
//! The crate covers conforming triangulations with red refinement, MINI and
//! Taylor-Hood mixed spaces, Newton iteration with a sparse direct solve,
//! Luxemburg-norm error measures, a manufactured-solution convergence study
//! and an electro-rheological flow scenario.

pub mod assembly;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod exponent;
pub mod mesh;
pub mod norms;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod spaces;
pub mod vtk;

pub use error::{Error, Result};
