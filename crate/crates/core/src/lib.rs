//! Spherical Fourier analysis and wave propagation on the ax+b group
//! R_+ x| R^n (hyperbolic space H^{n+1} as a solvable Lie group).
//!
//! The crate provides group geometry and Haar-measure quadrature, the
//! elementary spherical functions and their transform, spectral multiplier
//! kernels with their decay diagnostics, and wave-equation experiments for
//! delta^{1/2}-radial data, all over `f64`.

pub mod error;
pub mod fit;
pub mod geometry;
pub mod quad;
pub mod interp;
pub mod report;
pub mod multiplier;
pub mod spherical;
pub mod specfun;

pub use error::{Error, Result};
