//! Heterogeneous fast multipole method (H-FMM) for the 2-D Helmholtz
//! equation above an impedance half-space and in a three-layer medium
//! with sources and targets in the top layer.
//!
//! The free-space multipole/local machinery (P2M, M2M, M2L, L2L) is the
//! classical low-frequency Hankel/Bessel one. All spatial variance of the
//! layered kernel lives in the heterogeneous multipole-to-local operator
//! [`layered::compute_a`], which acts on the reflected free-space
//! multipole coefficients of a source box.

pub mod driver;
pub mod error;
pub mod expansions;
pub mod greens;
pub mod layered;
pub mod quadrature;
pub mod specfun;
pub mod tree;

pub use error::{Error, Result};
pub use num_complex::Complex64;
