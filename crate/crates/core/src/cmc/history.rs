use crate::error::{Error, Result};

/// Visit counts `h[s][a][s']` of observed transitions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistoryTensor {
    n_states: usize,
    n_actions: usize,
    counts: Vec<u32>,
    total: u64,
}

impl HistoryTensor {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, counts: vec![0; n_states * n_actions * n_states], total: 0 }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn offset(&self, s: usize, a: usize) -> usize {
        (s * self.n_actions + a) * self.n_states
    }

    /// Adds the one-hot of `next` to `h[s][a]`.
    pub fn record(&mut self, s: usize, a: usize, next: usize) -> Result<()> {
        for (i, bound) in [(s, self.n_states), (a, self.n_actions), (next, self.n_states)] {
            if i >= bound {
                return Err(Error::IndexOutOfRange { index: i, bound });
            }
        }
        let o = self.offset(s, a);
        self.counts[o + next] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn counts(&self, s: usize, a: usize) -> &[u32] {
        let o = self.offset(s, a);
        &self.counts[o..o + self.n_states]
    }

    /// `h[s][a]` as reals, the form the perception network consumes.
    pub fn counts_f64(&self, s: usize, a: usize) -> Vec<f64> {
        self.counts(s, a).iter().map(|&c| c as f64).collect()
    }

    /// Number of times `a` was taken in `s`.
    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.counts(s, a).iter().map(|&c| c as u64).sum()
    }

    /// Total number of recorded transitions.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Fraction of state–action pairs tried at least once.
    pub fn coverage(&self) -> f64 {
        let pairs = self.n_states * self.n_actions;
        let tried = (0..self.n_states)
            .flat_map(|s| (0..self.n_actions).map(move |a| (s, a)))
            .filter(|&(s, a)| self.visits(s, a) > 0)
            .count();
        tried as f64 / pairs as f64
    }
}
