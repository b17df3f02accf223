//! Numerical objects of the critical two-dimensional stochastic heat flow:
//! Volterra special functions, the point-interaction kernels K and P, measure
//! gluing on grids, Monte Carlo for the mollified SHE and polymer path samplers.

pub mod error;
pub mod quad;
pub(crate) mod rng;
pub mod specfun;

pub use error::{Error, Result};
pub mod io;
pub mod kernels;
pub mod measure;
pub mod she;
pub mod polymer;
