//! Numerical tools for propagating terraces of spatially periodic
//! reaction-diffusion equations.

pub mod error;
pub mod evolve;
pub mod fronts;
pub mod io;
pub mod problem;
pub mod spectral;
pub mod terrace;
pub mod verify;
pub mod wulff;

pub use error::{Error, Result};
