//! Special functions and closed-form entropy/KL calculus for Dirichlet and
//! diagonal-Gaussian distributions. Every information quantity used by the
//! agents is computed here.

mod dirichlet;
mod gaussian;
pub mod sampling;
mod simplex;
pub mod special;

pub use dirichlet::DirichletParams;
pub use gaussian::GaussianParams;
pub use simplex::{Simplex, SIMPLEX_TOL};
pub use special::{digamma, lgamma, trigamma};
