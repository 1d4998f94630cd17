//! Simulation and adjoint-based optimal control of slightly compressible
//! two-dimensional flows on structured grids.
//!
//! The state is a velocity/pressure pair evolving under a momentum equation
//! with Navier slip walls and a parabolic pressure equation carrying finite
//! compressibility and pressure diffusion, so pressure waves propagate at a
//! finite speed. A distributed bulk force acts as the control; the reduced
//! tracking cost is minimized with gradients obtained by transposing the
//! discrete time step, which keeps finite-difference gradient checks at
//! machine-accuracy agreement.

pub mod adjoint;
pub mod band;
pub mod boundary;
pub mod control;
pub mod cost;
pub mod error;
pub mod field;
pub mod forward;
pub mod ops;
pub mod verify;

pub use error::{Error, Result};
