//! Action selection: Bayesian Action Selection and the two baselines.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::history::HistoryTensor;
use super::perception::PosteriorModel;
use crate::error::{Error, Result};
use crate::numerics::sampling::sample_categorical;
use crate::numerics::Simplex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Bas,
    Random,
    Boltzmann,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Bas => "bas",
            Strategy::Random => "random",
            Strategy::Boltzmann => "boltzmann",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bas" => Ok(Strategy::Bas),
            "random" => Ok(Strategy::Random),
            "boltzmann" => Ok(Strategy::Boltzmann),
            other => Err(Error::InvalidParams(format!("unknown strategy {other:?}"))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights of the successor states in the BAS expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictiveWeights {
    /// Posterior mean α / α₀, the exact expectation of a sampled weight.
    Mean,
    /// A single Dirichlet sample z̃ per action (the default).
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasConfig {
    /// Include the expected-future-uncertainty term.
    pub future_uncertainty: bool,
    pub weights: PredictiveWeights,
}

impl Default for BasConfig {
    fn default() -> Self {
        Self { future_uncertainty: true, weights: PredictiveWeights::Sampled }
    }
}

/// Entropy of q(z_{s,a} | h_{s,a}) for every pair, indexed `s * |A| + a`.
pub fn entropy_table<M: PosteriorModel + ?Sized>(model: &M, history: &HistoryTensor) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(model.n_states() * model.n_actions());
    for s in 0..model.n_states() {
        for a in 0..model.n_actions() {
            out.push(model.posterior(s, a, &history.counts_f64(s, a))?.entropy());
        }
    }
    Ok(out)
}

/// BAS score of every action in state `s`:
///
/// `H(q(z|h)) − Σⱼ wⱼ H(q(z|h + eⱼ)) + Σⱼ wⱼ Σ_{a'} H(q(z_{j,a'}|h_{j,a'}))`,
///
/// the last sum present only when the future-uncertainty term is enabled.
/// `entropies` may carry a precomputed [`entropy_table`] for the current
/// history; it is computed on demand otherwise.
pub fn bas_score<M: PosteriorModel + ?Sized, R: Rng + ?Sized>(
    model: &M,
    s: usize,
    history: &HistoryTensor,
    config: &BasConfig,
    entropies: Option<&[f64]>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (n_s, n_a) = (model.n_states(), model.n_actions());
    if s >= n_s {
        return Err(Error::IndexOutOfRange { index: s, bound: n_s });
    }
    let owned;
    let table = match (config.future_uncertainty, entropies) {
        (false, _) => None,
        (true, Some(t)) => Some(t),
        (true, None) => {
            owned = entropy_table(model, history)?;
            Some(owned.as_slice())
        }
    };
    let future: Option<Vec<f64>> = table.map(|t| t.chunks_exact(n_a).map(|row| row.iter().sum()).collect());

    let mut scores = Vec::with_capacity(n_a);
    for a in 0..n_a {
        let h = history.counts_f64(s, a);
        let q = model.posterior(s, a, &h)?;
        let w = match config.weights {
            PredictiveWeights::Mean => q.mean(),
            PredictiveWeights::Sampled => q.sample(rng),
        };
        let mut expected_entropy = 0.0;
        let mut expected_future = 0.0;
        let mut h_plus = h.clone();
        for (j, &wj) in w.probs().iter().enumerate() {
            h_plus[j] += 1.0;
            expected_entropy += wj * model.posterior(s, a, &h_plus)?.entropy();
            h_plus[j] -= 1.0;
            if let Some(f) = &future {
                expected_future += wj * f[j];
            }
        }
        scores.push(q.entropy() - expected_entropy + expected_future);
    }
    Ok(scores)
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

/// π(a) ∝ exp(−(1/τ) Σ_{s'} h[s][a][s']).
pub fn boltzmann_policy(history: &HistoryTensor, s: usize, tau: f64) -> Result<Simplex<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParams(format!("temperature must be positive, got {tau}")));
    }
    if s >= history.n_states() {
        return Err(Error::IndexOutOfRange { index: s, bound: history.n_states() });
    }
    let visits: Vec<f64> = (0..history.n_actions()).map(|a| history.visits(s, a) as f64).collect();
    Ok(softmax_neg_counts(&visits, tau))
}

/// Softmax of `−counts / τ`, shifted by the minimum count for stability.
pub fn softmax_neg_counts(counts: &[f64], tau: f64) -> Simplex<f64> {
    let min = counts.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = counts.iter().map(|c| (-(c - min) / tau).exp()).collect();
    Simplex::from_weights(w).expect("the minimum-count action has unit weight")
}

pub fn random_policy(n_actions: usize) -> Simplex<f64> {
    Simplex::uniform(n_actions)
}

/// Linear anneal from `start` at step 0 to `end` at step `steps − 1`.
pub fn annealed_temperature(start: f64, end: f64, step: usize, steps: usize) -> f64 {
    if steps <= 1 {
        return start;
    }
    start + (end - start) * step as f64 / (steps - 1) as f64
}

pub fn sample_action<R: Rng + ?Sized>(policy: &Simplex<f64>, rng: &mut R) -> usize {
    sample_categorical(policy.probs(), rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmc::perception::ConjugatePosterior;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn conjugate_score_on_empty_two_state_history() {
        let model = ConjugatePosterior { n_states: 2, n_actions: 3, prior: 1.0 };
        let h = HistoryTensor::new(2, 3);
        let cfg = BasConfig { future_uncertainty: false, weights: PredictiveWeights::Mean };
        let scores = bas_score(&model, 0, &h, &cfg, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        for s in scores {
            assert!((s - 0.193_147_180_6).abs() < 1e-10);
        }
    }

    #[test]
    fn symmetric_histories_tie() {
        let model = ConjugatePosterior { n_states: 3, n_actions: 4, prior: 1.0 };
        let mut h = HistoryTensor::new(3, 4);
        for a in 0..4 {
            h.record(1, a, 0).unwrap();
            h.record(1, a, 2).unwrap();
        }
        let cfg = BasConfig { future_uncertainty: true, weights: PredictiveWeights::Mean };
        let scores = bas_score(&model, 1, &h, &cfg, None, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(scores.iter().all(|&v| v == scores[0]));
        assert_eq!(argmax(&scores), 0);
    }

    #[test]
    fn future_term_matches_enumeration() {
        let model = ConjugatePosterior { n_states: 3, n_actions: 2, prior: 1.0 };
        let mut h = HistoryTensor::new(3, 2);
        for &(s, a, n) in &[(0, 0, 1), (0, 1, 2), (1, 0, 1), (1, 1, 1), (2, 0, 0), (0, 0, 1)] {
            h.record(s, a, n).unwrap();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let off = BasConfig { future_uncertainty: false, weights: PredictiveWeights::Mean };
        let on = BasConfig { future_uncertainty: true, weights: PredictiveWeights::Mean };
        let base = bas_score(&model, 0, &h, &off, None, &mut rng).unwrap();
        let full = bas_score(&model, 0, &h, &on, None, &mut rng).unwrap();
        for a in 0..2 {
            // Brute force: posterior-mean weights of (0, a) times the summed
            // conjugate entropies of each successor's rows.
            let counts = h.counts_f64(0, a);
            let total: f64 = counts.iter().map(|c| c + 1.0).sum();
            let mut efu = 0.0;
            for (j, c) in counts.iter().enumerate() {
                let wj = (c + 1.0) / total;
                for b in 0..2 {
                    let alpha: Vec<f64> = h.counts_f64(j, b).iter().map(|c| c + 1.0).collect();
                    efu += wj * crate::numerics::DirichletParams::new(alpha).unwrap().entropy();
                }
            }
            assert!((full[a] - base[a] - efu).abs() < 1e-12);
        }
    }

    #[test]
    fn boltzmann_examples() {
        let h = HistoryTensor::new(2, 4);
        let p = boltzmann_policy(&h, 0, 1.0).unwrap();
        assert_eq!(p.probs(), &[0.25; 4]);

        let p = softmax_neg_counts(&[10.0, 0.0, 0.0, 0.0], 1.0);
        let expected = [1.513_308_090_722_486e-5, 0.333_328_288_973_031, 0.333_328_288_973_031, 0.333_328_288_973_031];
        for (a, b) in p.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-9);
        }
        let p = softmax_neg_counts(&[10.0, 0.0, 3.0, 1.0], 1e5);
        assert!(p.probs().iter().all(|v| (v - 0.25).abs() < 1e-3));
        assert!(boltzmann_policy(&h, 0, 0.0).is_err());
    }

    #[test]
    fn boltzmann_is_permutation_equivariant() {
        let a = softmax_neg_counts(&[3.0, 1.0, 4.0, 1.0], 0.7);
        let b = softmax_neg_counts(&[4.0, 1.0, 1.0, 3.0], 0.7);
        assert_eq!(a.probs()[0], b.probs()[3]);
        assert_eq!(a.probs()[2], b.probs()[0]);
        assert!((a.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn anneal_endpoints() {
        assert_eq!(annealed_temperature(1.0, 0.1, 0, 11), 1.0);
        assert!((annealed_temperature(1.0, 0.1, 10, 11) - 0.1).abs() < 1e-15);
        assert!((annealed_temperature(1.0, 0.1, 5, 11) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn strategy_names_parse() {
        for s in [Strategy::Bas, Strategy::Random, Strategy::Boltzmann] {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert!("greedy".parse::<Strategy>().is_err());
    }
}
