//! Fractional operators acting on the expectation of second-order
//! stochastic processes.
//!
//! Every stochastic operator in this crate is the classical
//! Riemann–Liouville or Caputo operator applied to `t ↦ E(X_t)`, estimated
//! from a finite [`ensemble::Ensemble`] of sample paths. On top of the
//! operators sit a verification harness for the composition and
//! integration-by-parts identities ([`properties`]) and a solver for
//! fractional variational problems posed on the mean ([`variational`]).
//!
//! Module map:
//!
//! - [`grid`]: uniform grids, gridded functions, finite differences, trapezoid rule
//! - [`ensemble`]: sample-path generation, CSV persistence, mean estimation
//! - [`fracnum`]: deterministic fractional integrals and derivatives
//! - [`stochfrac`]: the six stochastic operators and the boundedness check
//! - [`properties`]: numerical identity checks and the suite runner
//! - [`variational`]: functionals, Euler–Lagrange residuals and solvers
//! - [`cli`]: the `stochfrac` command line

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod fracnum;
pub mod grid;
pub mod properties;
pub mod special;
pub mod stochfrac;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{Grid, GriddedFn};
