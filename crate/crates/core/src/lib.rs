//! Source reconstruction for the scalar wave equation from single-point
//! measurements perturbed by small high-contrast droplets.

pub mod asymptotics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod forward;
pub mod inversion;
pub mod output;
pub mod quadrature;
pub mod special;
pub mod spectrum;
pub mod spline;
pub mod vec3;

pub use error::{Error, Result};
