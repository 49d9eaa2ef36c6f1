//! Multivariate Gaussian random fields built from stochastic PDEs on a grid,
//! with priors whose cross-correlation varies in space along SPD geodesics,
//! a linearised AVA observation model, and maximum-likelihood fitting.

pub mod ava;
pub mod discretize;
pub mod error;
pub mod harness;
pub mod inference;
pub mod prior;
pub mod sparse;
pub mod spd;

pub use error::{Error, Result};
