//! Geodesics in the space of Kähler potentials via power-series solutions of
//! the homogeneous complex Monge–Ampère equation.

pub mod cli;
pub mod divisor;
pub mod error;
pub mod ivp;
pub mod oracle;
pub mod ray;
pub mod surface;

pub use error::{Error, PositivityFailure, Result};
