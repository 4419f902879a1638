//! Stabilized sequential quadratic semidefinite programming (SQSDP) for
//! nonlinear semidefinite programs
//!
//! ```text
//! minimize f(x)  subject to  g(x) = 0,  X(x) ⪰ 0
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`symkernel`]: symmetric-matrix calculus (eigendecomposition, PSD
//!   projection and its directional derivative, pseudoinverse, eigenvalue
//!   partitions, tangent-cone test).
//! - [`model`]: the problem contract, Lagrangian derivatives and the KKT
//!   residual `σ(v)`.
//! - [`subqp`]: the stabilized QSDP subproblem and its semismooth Newton solver.
//! - [`outer`]: the locally convergent outer iteration and rate measurement.
//! - [`diagnostics`]: numerical probes of error bounds, complementarity and
//!   second-order conditions.
//! - [`problems`]: polynomial problem files and the built-in registry.

pub mod diagnostics;
pub mod error;
pub mod model;
pub mod outer;
pub mod problems;
pub mod subqp;
pub mod symkernel;

pub use error::{Error, Result};
