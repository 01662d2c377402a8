//! Tail asymptotics of random contractions `X = R · S₁ ⋯ Sₙ`.
//!
//! The crate evaluates closed-form tail approximations for products of a
//! positive risk with independent `(0, 1]`-valued factors, in each of the
//! three max-domains of attraction, and checks them against independent
//! quadrature and Monte Carlo oracles. It also covers discrete-time ruin
//! probabilities with random discounting, subexponentiality diagnostics,
//! conditional tail expectations and bivariate scale mixtures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod asymptotics;
pub mod cli;
pub mod dist;
pub mod error;
pub mod interp;
pub mod mc;
pub mod oracle;
pub mod quad;
pub mod risk;
pub mod special;
pub mod subexp;

pub use dist::{make_builtin, power_scale, Distribution, Family, Law, ScalingSpec, TailClass};
pub use error::{Error, Result};
