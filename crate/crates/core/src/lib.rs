//! Simulation, exact increment laws, jump-filtering Markov kernels and
//! closed-form distance bounds for drift estimation in time-inhomogeneous
//! jump-diffusion models.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds the experiment parameterisation and per-interval summaries,
//! * [`simulate`] draws exact-law increments,
//! * [`laws`] builds exact 1-D increment densities and characteristic functions,
//! * [`kernels`] implements the jump-erasing kernels and sufficient statistics,
//! * [`distances`] evaluates the closed-form distances and bounds,
//! * [`oracle`] computes exact distances by adaptive quadrature,
//! * [`experiments`] runs the convergence and risk-transfer studies,
//! * [`config`] and [`cli`] form the batch front door.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod distances;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod laws;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
