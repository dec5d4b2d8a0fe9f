//! Amortized variational perception coupled to information-gain action
//! selection.
//!
//! Two settings are covered:
//!
//! - [`cmc`]: controllable Markov chains. A Dirichlet perception network
//!   learns transition distributions from visit counts and actions are
//!   chosen to maximize the expected reduction in posterior entropy.
//! - [`av`]: active vision. A two-level Gaussian VAE integrates foveated
//!   glimpses, and an action network is trained to pick fixations with high
//!   Monte-Carlo information value.
//!
//! [`numerics`] holds the special functions and Dirichlet/Gaussian entropy
//! and KL formulas; [`diff`] is the reverse-mode tape the networks run on.
//! Both are generic over the scalar type; the aliases below fix `f64`,
//! which is what the agents use.

// `!(x > 0)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod av;
pub mod cmc;
pub mod diff;
mod error;
pub mod numerics;
pub mod pgm;
mod real;
pub mod seed;

pub use error::{Error, Result};
pub use real::Real;

pub type Dirichlet = numerics::DirichletParams<f64>;
pub type Gaussian = numerics::GaussianParams<f64>;
pub type Probabilities = numerics::Simplex<f64>;
pub type Net = diff::DenseNet<f64>;
pub type Tape64<'a> = diff::Tape<'a, f64>;
pub type Adam = diff::Optimizer<f64>;

/// The random stream used everywhere: ChaCha8, seeded from a `u64`.
pub type Rng = rand_chacha::ChaCha8Rng;
