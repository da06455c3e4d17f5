//! Spectral computations for energy-dependent Sturm-Liouville problems
//!
//! -y'' + q y + 2 lambda p y = lambda^2 y on (0, 1), with q = r' and p, r in L2,
//! under Dirichlet or mixed boundary conditions.

pub mod config;
pub mod contour;
pub mod dirac;
pub mod error;
pub mod factorize;
pub mod kernel;
pub mod linalg;
pub mod miura;
pub mod oracle;
pub mod potentials;
pub mod quadrature;
pub mod spectrum;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
