//! Dirichlet distributions and their closed-form information calculus.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::sample_gamma;
use super::simplex::Simplex;
use super::special::{ln_gamma, psi};
use crate::error::{Error, Result};
use crate::real::Real;

/// Concentration parameters of a Dirichlet distribution over `N ≥ 2`
/// categories. Every component is finite and strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct DirichletParams<T> {
    alpha: Vec<T>,
}

impl<T: Real> DirichletParams<T> {
    pub fn new(alpha: Vec<T>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::InvalidParams(format!("Dirichlet needs at least 2 categories, got {}", alpha.len())));
        }
        if let Some(bad) = alpha.iter().find(|a| !(a.is_finite() && **a > T::zero())) {
            return Err(Error::Domain { what: "Dirichlet concentration", value: bad.as_f64() });
        }
        Ok(Self { alpha })
    }

    /// Symmetric Dirichlet with every concentration equal to `c`.
    pub fn symmetric(n: usize, c: T) -> Result<Self> {
        Self::new(vec![c; n])
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Total concentration α₀ = Σ αᵢ.
    pub fn concentration(&self) -> T {
        self.alpha.iter().copied().sum()
    }

    /// Log of the multivariate beta function, the density normalizer.
    pub fn log_beta(&self) -> T {
        let sum_ln: T = self.alpha.iter().map(|&a| ln_gamma(a)).sum();
        sum_ln - ln_gamma(self.concentration())
    }

    /// Differential entropy.
    pub fn entropy(&self) -> T {
        let a0 = self.concentration();
        let n = T::from_usize_lossy(self.dim());
        let cross: T = self.alpha.iter().map(|&a| (a - T::one()) * psi(a)).sum();
        self.log_beta() + (a0 - n) * psi(a0) - cross
    }

    /// KL(self ‖ other). Clamped at zero against rounding.
    pub fn kl(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let psi0 = psi(self.concentration());
        let cross: T = self.alpha.iter().zip(&other.alpha).map(|(&q, &p)| (q - p) * (psi(q) - psi0)).sum();
        Ok((other.log_beta() - self.log_beta() + cross).max(T::zero()))
    }

    /// Componentwise E[log zᵢ] = ψ(αᵢ) − ψ(α₀).
    pub fn expected_log(&self) -> Vec<T> {
        let psi0 = psi(self.concentration());
        self.alpha.iter().map(|&a| psi(a) - psi0).collect()
    }

    /// Mean α / α₀.
    pub fn mean(&self) -> Simplex<T> {
        let a0 = self.concentration();
        Simplex::from_weights(self.alpha.iter().map(|&a| a / a0).collect())
            .expect("positive concentrations have positive mass")
    }

    /// Draws z by normalizing independent Gamma(αᵢ, 1) variates.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Simplex<T> {
        loop {
            let draws: Vec<f64> = self.alpha.iter().map(|a| sample_gamma(a.as_f64(), rng)).collect();
            let total: f64 = draws.iter().sum();
            // All-underflow is possible for tiny concentrations; redraw.
            if total > 0.0 && total.is_finite() {
                let probs = draws.iter().map(|g| T::lit(g / total)).collect();
                if let Ok(s) = Simplex::from_weights(probs) {
                    return s;
                }
            }
        }
    }

    /// Log density at an interior point of the simplex.
    pub fn log_density(&self, z: &[T]) -> T {
        let body: T = self.alpha.iter().zip(z).map(|(&a, &zi)| (a - T::one()) * zi.ln()).sum();
        body - self.log_beta()
    }
}

impl<T: Real> TryFrom<Vec<T>> for DirichletParams<T> {
    type Error = Error;

    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T> From<DirichletParams<T>> for Vec<T> {
    fn from(d: DirichletParams<T>) -> Self {
        d.alpha
    }
}
