//! Diagonal Gaussian distributions parameterized by mean and log standard
//! deviation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sampling::standard_normal;
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams<T> {
    mean: Vec<T>,
    log_std: Vec<T>,
}

impl<T: Real> GaussianParams<T> {
    pub fn new(mean: Vec<T>, log_std: Vec<T>) -> Result<Self> {
        if mean.len() != log_std.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: log_std.len() });
        }
        if mean.iter().chain(&log_std).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("Gaussian parameters must be finite".into()));
        }
        Ok(Self { mean, log_std })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![T::zero(); dim], log_std: vec![T::zero(); dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn log_std(&self) -> &[T] {
        &self.log_std
    }

    pub fn std(&self) -> Vec<T> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }

    /// Σ log σᵢ + (D/2) log(2πe).
    pub fn entropy(&self) -> T {
        let half_log_2pie = T::lit(0.5) * (T::lit(2.0) * T::PI() * T::E()).ln();
        self.log_std.iter().copied().sum::<T>() + T::from_usize_lossy(self.dim()) * half_log_2pie
    }

    /// KL(self ‖ N(0, I)) = ½ Σ (μ² + σ² − 1 − 2 log σ).
    pub fn kl_std_normal(&self) -> T {
        let half = T::lit(0.5);
        let s: T = self.mean.iter().zip(&self.log_std).map(|(&m, &l)| m * m + (l + l).exp() - T::one() - (l + l)).sum();
        (half * s).max(T::zero())
    }

    /// KL(self ‖ other) between diagonal Gaussians.
    pub fn kl(&self, other: &Self) -> Result<T> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let half = T::lit(0.5);
        let mut s = T::zero();
        for i in 0..self.dim() {
            let (mq, lq) = (self.mean[i], self.log_std[i]);
            let (mp, lp) = (other.mean[i], other.log_std[i]);
            let ratio = ((lq - lp) * T::lit(2.0)).exp();
            let d = (mq - mp) * (-lp).exp();
            s = s + half * (ratio + d * d - T::one()) + lp - lq;
        }
        Ok(s.max(T::zero()))
    }

    /// Reparameterized draw μ + σ ⊙ ε with ε ~ N(0, I).
    pub fn reparam_sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let eps: Vec<T> = (0..self.dim()).map(|_| T::lit(standard_normal(rng))).collect();
        self.transform_noise(&eps)
    }

    /// Maps standard-normal noise through the reparameterization.
    pub fn transform_noise(&self, eps: &[T]) -> Vec<T> {
        self.mean.iter().zip(&self.log_std).zip(eps).map(|((&m, &l), &e)| m + l.exp() * e).collect()
    }

    pub fn log_density(&self, x: &[T]) -> T {
        let half = T::lit(0.5);
        let log_2pi = (T::lit(2.0) * T::PI()).ln();
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(x)
            .map(|((&m, &l), &xi)| {
                let u = (xi - m) * (-l).exp();
                -half * u * u - l - half * log_2pi
            })
            .sum()
    }
}
