use serde::{Deserialize, Serialize};

use super::params::Tensor;
use crate::error::{Error, Result};
use crate::real::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// First-order optimizer minimizing a loss; ascent objectives negate their
/// loss before calling [`Optimizer::step`].
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    lr: T,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    steps: u64,
}

impl<T: Real> Optimizer<T> {
    pub fn new(kind: OptimizerKind, lr: T) -> Result<Self> {
        if !(lr > T::zero() && lr.is_finite()) {
            return Err(Error::InvalidParams(format!("learning rate must be positive, got {lr}")));
        }
        Ok(Self { kind, lr, m: Vec::new(), v: Vec::new(), steps: 0 })
    }

    pub fn adam(lr: T) -> Self {
        Self::new(OptimizerKind::Adam, lr).expect("positive learning rate")
    }

    pub fn sgd(lr: T) -> Self {
        Self::new(OptimizerKind::Sgd, lr).expect("positive learning rate")
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> T {
        self.lr
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. `grads[i]` must match `params[i]` in length, and
    /// the parameter list must keep the same shapes across calls.
    pub fn step(&mut self, params: Vec<&mut Tensor<T>>, grads: &[Vec<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch { expected: params.len(), got: grads.len() });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.data.len() != g.len() {
                return Err(Error::DimensionMismatch { expected: p.data.len(), got: g.len() });
            }
        }
        if self.kind == OptimizerKind::Adam {
            if self.m.is_empty() {
                self.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
                self.v = self.m.clone();
            } else if self.m.len() != params.len() || self.m.iter().zip(&params).any(|(m, p)| m.len() != p.len()) {
                return Err(Error::InvalidParams("parameter shapes changed between optimizer steps".into()));
            }
        }
        self.steps += 1;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (w, &gi) in p.data.iter_mut().zip(g) {
                        *w = *w - self.lr * gi;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps) = (T::lit(ADAM_BETA1), T::lit(ADAM_BETA2), T::lit(ADAM_EPS));
                let t = self.steps as i32;
                let c1 = T::one() - b1.powi(t);
                let c2 = T::one() - b2.powi(t);
                for ((p, g), (m, v)) in params.into_iter().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
                    for (((w, &gi), mi), vi) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *mi = b1 * *mi + (T::one() - b1) * gi;
                        *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                        let mhat = *mi / c1;
                        let vhat = *vi / c2;
                        *w = *w - self.lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(v: f64) -> Tensor<f64> {
        Tensor { name: "p".into(), shape: vec![1], data: vec![v] }
    }

    #[test]
    fn sgd_step() {
        let mut p = scalar_param(1.0);
        Optimizer::sgd(0.1).step(vec![&mut p], &[vec![2.0]]).unwrap();
        assert!((p.data[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_unit_scaled() {
        let mut p = scalar_param(1.0);
        Optimizer::adam(0.001).step(vec![&mut p], &[vec![2.0]]).unwrap();
        // m̂ = g and v̂ = g², so the step is lr · g / (|g| + ε).
        let expected = 1.0 - 0.001 * 2.0 / (2.0 + 1e-8);
        assert!((p.data[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for mut opt in [Optimizer::sgd(0.5), Optimizer::adam(0.5)] {
            let mut p = scalar_param(3.25);
            for _ in 0..5 {
                opt.step(vec![&mut p], &[vec![0.0]]).unwrap();
            }
            assert_eq!(p.data[0], 3.25);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = scalar_param(1.0);
        let mut opt = Optimizer::adam(0.01);
        assert!(opt.step(vec![&mut p], &[vec![1.0, 2.0]]).is_err());
        assert!(opt.step(vec![&mut p], &[]).is_err());
        assert!(Optimizer::<f64>::new(OptimizerKind::Sgd, 0.0).is_err());
    }
}
