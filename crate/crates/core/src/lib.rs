//! Bayesian inversion for porous-medium tumor growth models
//! `rho_t = lap(rho^m) + h(x) rho`.
//!
//! The crate couples an asymptotic-preserving finite-volume forward solver,
//! uniformly stable in the pressure exponent `m`, with a random-walk
//! Metropolis-Hastings sampler over the unknown initial-data center and
//! growth field.
//!
//! * [`grid`]: uniform meshes, staggered fields, initial data.
//! * [`field_io`]: plain-text field dumps.
//! * [`solver`]: prediction / transport / correction time stepping.
//! * [`observation`]: linear observation functionals and noise.
//! * [`prior`]: parametric and truncated-expansion priors.
//! * [`posterior`]: misfit potential, posterior density, Hellinger estimates.
//! * [`mcmc`]: Metropolis-Hastings chains and the multi-run MSE protocol.
//! * [`experiment`]: config-driven experiment runner behind the CLI.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod field_io;
pub mod grid;
pub mod linalg;
pub mod mcmc;
pub mod model;
pub mod observation;
pub mod posterior;
pub mod prior;
pub mod solver;

pub use error::{Error, Result};
