//! Exploration-quality metrics.

use super::kernel::TransitionKernel;
use crate::error::{Error, Result};

/// Σ over (s, a) of KL(p(·|s,a) ‖ p̂(·|s,a)), with 0 · log(0 / x) = 0.
///
/// Returns `+∞` when the learned kernel assigns zero mass where the true
/// kernel does not.
pub fn missing_information(truth: &TransitionKernel, learned: &TransitionKernel) -> Result<f64> {
    if truth.n_states() != learned.n_states() {
        return Err(Error::DimensionMismatch { expected: truth.n_states(), got: learned.n_states() });
    }
    if truth.n_actions() != learned.n_actions() {
        return Err(Error::DimensionMismatch { expected: truth.n_actions(), got: learned.n_actions() });
    }
    Ok(truth.rows().zip(learned.rows()).map(|(p, q)| kl_rows(p, q)).sum())
}

/// KL between two categorical rows.
pub fn kl_rows(p: &[f64], q: &[f64]) -> f64 {
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return f64::INFINITY;
            }
            kl += pi * (pi / qi).ln();
        }
    }
    kl.max(0.0)
}

/// Visit counts of each state of a `side × side` grid along a trajectory.
pub fn visitation_map(trajectory: &[usize], side: usize) -> Vec<f64> {
    let mut map = vec![0.0; side * side];
    for &s in trajectory {
        if s < map.len() {
            map[s] += 1.0;
        }
    }
    map
}

/// Divides by the maximum entry; an all-zero map stays zero.
pub fn max_normalized(map: &[f64]) -> Vec<f64> {
    let max = map.iter().copied().fold(0.0_f64, f64::max);
    if max > 0.0 {
        map.iter().map(|v| v / max).collect()
    } else {
        map.to_vec()
    }
}
