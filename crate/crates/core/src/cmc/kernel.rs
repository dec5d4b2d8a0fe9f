//! Ground-truth transition kernels of controllable Markov chains.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::sampling::sample_categorical;
use crate::numerics::{DirichletParams, SIMPLEX_TOL};

/// `|S| × |A|` table of next-state distributions, stored row-major with the
/// row for `(s, a)` at `s * n_actions + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

/// JSON form: dimensions plus the row-major probability list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub probs: Vec<f64>,
}

impl TransitionKernel {
    /// Builds a kernel, validating that every row lies on the simplex.
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if n_states < 2 || n_actions < 1 {
            return Err(Error::InvalidParams(format!(
                "kernel needs ≥2 states and ≥1 action, got {n_states}×{n_actions}"
            )));
        }
        let expected = n_states * n_actions * n_states;
        if probs.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: probs.len() });
        }
        for (r, row) in probs.chunks_exact(n_states).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) || (total - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidParams(format!("kernel row {r} is not a probability vector")));
            }
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let i = (state * self.n_actions + action) * self.n_states;
        &self.probs[i..i + self.n_states]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.probs.chunks_exact(self.n_states)
    }

    fn check(&self, state: usize, action: usize) -> Result<()> {
        if state >= self.n_states {
            return Err(Error::IndexOutOfRange { index: state, bound: self.n_states });
        }
        if action >= self.n_actions {
            return Err(Error::IndexOutOfRange { index: action, bound: self.n_actions });
        }
        Ok(())
    }

    /// Samples the successor of `state` under `action`.
    pub fn step<R: Rng + ?Sized>(&self, state: usize, action: usize, rng: &mut R) -> Result<usize> {
        self.check(state, action)?;
        Ok(sample_categorical(self.row(state, action), rng))
    }

    pub fn to_file(&self) -> KernelFile {
        KernelFile { n_states: self.n_states, n_actions: self.n_actions, probs: self.probs.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_file())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: KernelFile = serde_json::from_str(s)?;
        Self::new(f.n_states, f.n_actions, f.probs)
    }
}

/// Dense World: every row drawn independently from the flat Dir(1, …, 1).
pub fn make_dense_world<R: Rng + ?Sized>(n_states: usize, n_actions: usize, rng: &mut R) -> Result<TransitionKernel> {
    if n_states < 2 {
        return Err(Error::InvalidParams("dense world needs at least 2 states".into()));
    }
    let prior = DirichletParams::symmetric(n_states, 1.0)?;
    let mut probs = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        probs.extend(prior.sample(rng).into_inner());
    }
    TransitionKernel::new(n_states, n_actions, probs)
}
