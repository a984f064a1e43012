//! Frame-derived state space models.
//!
//! Builds continuous-time SSMs `(A, B)` from a sampled function frame (orthogonal
//! polynomials or a redundant wavelet frame) and its dual, reduces them to a
//! diagonal system, turns them into convolution kernels and benchmarks delay
//! reconstruction.

pub mod delaybench;
pub mod error;
pub mod frames;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod plot;
pub mod safari;
pub mod spectral;

pub use error::{Error, Result};
