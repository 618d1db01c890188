//! Desk-scale numerical laboratory for vector-valued stochastic convolutions
//! driven by cylindrical Brownian motion.
//!
//! The crate simulates convolutions `S ⋄ G(t) = ∫₀ᵗ S(t−s) G(s) dW_H(s)` for
//! finite-dimensional sectorial generators acting on ℓ^q_d, and provides the
//! statistical machinery (moment estimators, tail estimators, dilation and
//! renorming checks) used to exercise maximal inequalities for such processes.

pub mod config;
pub mod dilation;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod gammanorm;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod renorm;
pub mod report;
pub mod rng;
pub mod simulate;
pub mod suite;

pub use error::{Error, Result};
