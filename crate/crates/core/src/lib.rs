//! Time-inhomogeneous branching processes through reverse evolution families.
//!
//! Laplace exponents `v_{s,t}` of a continuous-state branching process solve
//! the backward equation `∂_s v = φ(v, s)`, `v(t) = ζ`, where `φ` is a
//! Herglotz vector field parameterized by a Lévy family `(q, a, b, π)`.
//! The discrete-state analogue replaces Laplace exponents with probability
//! generating functions `F_{s,t}` and `φ` with `Φ(z, s) = q z + Σ α(n)(z - zⁿ)`.
//!
//! Module map:
//! - [`measure`]: discretized jump/Lévy measures and their kernels
//! - [`bernstein`]: Bernstein functions, composition, fixed points
//! - [`field`]: piecewise-constant Herglotz vector fields
//! - [`evolution`]: the backward ODE solver for `v_{s,t}`
//! - [`csbp`]: moments, extinction and monotonicity of the branching process
//! - [`pgf`]: generating families and PGF evolution
//! - [`montecarlo`]: exact path simulation used as an independent check
//! - [`scenario`]: JSON scenario runner behind the CLI

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein;
pub mod csbp;
pub mod error;
pub mod evolution;
pub mod field;
pub mod measure;
pub mod montecarlo;
pub mod ode;
pub mod pgf;
pub mod scenario;
pub mod util;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
