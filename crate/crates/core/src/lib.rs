//! Radially symmetric steady states of the barotropic compressible
//! Navier-Stokes system with inflow/outflow boundary conditions, a
//! finite-volume solver for the symmetric time-dependent problem, and
//! relative-energy diagnostics along trajectories.

pub mod eos;
pub mod evolve;
pub mod error;
pub mod geometry;
pub mod ode;
pub mod quadrature;
pub mod relenergy;
pub mod steady;

pub use eos::{Eos, EosSpec};
pub use error::{Error, Result};
pub use geometry::{BoundaryData, Geometry};
