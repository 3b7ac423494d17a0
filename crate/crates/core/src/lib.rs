//! Positive radial solutions of `Δu + mu/δ(x)^2 u = u^p` on a ball.
//!
//! The crate computes the closed-form constants of an instance, integrates
//! the radial equation up to the singular boundary, extracts boundary
//! coefficients, locates the blowup threshold of the superlinear problem and
//! solves the inverse problem of prescribing the boundary coefficient.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod linearfuchs;
pub mod model;
pub mod shooting;
pub mod stepper;

pub use error::{Error, Result};
pub use model::{Exponents, Problem, Regime};
