//! The active-sensing loop: select, act, record, learn.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::history::HistoryTensor;
use super::kernel::TransitionKernel;
use super::metrics::missing_information;
use super::perception::{CmcPerception, CountEncoding, ElboMode, PerceptionConfig, PosteriorModel};
use super::policy::{
    annealed_temperature, argmax, bas_score, boltzmann_policy, entropy_table, random_policy, sample_action, BasConfig,
    Strategy,
};
use crate::diff::OptimizerKind;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmcAgentConfig {
    pub strategy: Strategy,
    pub steps: usize,
    pub beta: f64,
    pub elbo_mode: ElboMode,
    pub tau_start: f64,
    pub tau_end: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub count_encoding: CountEncoding,
    pub bas: BasConfig,
    /// Extra ELBO steps per environment step, each on a uniformly drawn
    /// `(s, a)` pair with its current history. Zero trains only the pair
    /// just visited.
    pub replay_pairs: usize,
    /// A log row is written every `log_every` steps and after the last one.
    pub log_every: usize,
    pub seed: u64,
}

impl Default for CmcAgentConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Bas,
            steps: 2000,
            beta: 1.0,
            elbo_mode: ElboMode::Analytic,
            tau_start: 1.0,
            tau_end: 0.1,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            count_encoding: CountEncoding::Raw,
            bas: BasConfig::default(),
            replay_pairs: 1,
            log_every: 1,
            seed: 0,
        }
    }
}

impl CmcAgentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidParams("steps must be ≥ 1".into()));
        }
        if !(self.tau_start > 0.0 && self.tau_end > 0.0) {
            return Err(Error::InvalidParams("temperatures must be positive".into()));
        }
        if self.log_every < 1 {
            return Err(Error::InvalidParams("log_every must be ≥ 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParams("beta must be ≥ 0".into()));
        }
        Ok(())
    }

    pub fn perception(&self) -> PerceptionConfig {
        PerceptionConfig {
            learning_rate: self.learning_rate,
            beta: self.beta,
            optimizer: self.optimizer,
            encoding: self.count_encoding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcLogRow {
    pub step: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub missing_info: f64,
    pub coverage: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub rows: Vec<CmcLogRow>,
    /// Missing information of the untrained model, before the first step.
    pub initial_missing_info: f64,
    /// Visited states, starting with the initial state.
    pub trajectory: Vec<usize>,
    pub history: HistoryTensor,
    pub learned: TransitionKernel,
}

pub const RUNLOG_HEADER: [&str; 6] = ["step", "strategy", "seed", "missing_info", "coverage", "loss"];

impl RunLog {
    pub fn final_row(&self) -> &CmcLogRow {
        self.rows.last().expect("a run has at least one step")
    }

    /// RFC-4180 CSV with header `step,strategy,seed,missing_info,coverage,loss`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(RUNLOG_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            out.write_record([
                r.step.to_string(),
                r.strategy.to_string(),
                r.seed.to_string(),
                r.missing_info.to_string(),
                r.coverage.to_string(),
                r.loss.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Per-(s, a) posterior means of `model` under `history`.
pub fn learned_kernel<M: PosteriorModel + ?Sized>(model: &M, history: &HistoryTensor) -> Result<TransitionKernel> {
    let (n_s, n_a) = (model.n_states(), model.n_actions());
    let mut probs = Vec::with_capacity(n_s * n_a * n_s);
    for s in 0..n_s {
        for a in 0..n_a {
            probs.extend(model.posterior(s, a, &history.counts_f64(s, a))?.mean().into_inner());
        }
    }
    TransitionKernel::new(n_s, n_a, probs)
}

/// Runs one episode of `config.steps` steps on `kernel`.
///
/// Random streams for the environment, the network initialization, the
/// policy and the ELBO sampler are all derived from `config.seed`.
pub fn run_episode(config: &CmcAgentConfig, kernel: &TransitionKernel) -> Result<RunLog> {
    config.validate()?;
    let (n_s, n_a) = (kernel.n_states(), kernel.n_actions());
    let mut env_rng = seed::stream(config.seed, "cmc.env");
    let mut policy_rng = seed::stream(config.seed, "cmc.policy");
    let mut elbo_rng = seed::stream(config.seed, "cmc.elbo");
    let mut replay_rng = seed::stream(config.seed, "cmc.replay");
    let mut perception = CmcPerception::new(n_s, n_a, config.perception(), &mut seed::stream(config.seed, "cmc.init"))?;
    let mut history = HistoryTensor::new(n_s, n_a);

    let initial_missing_info = missing_information(kernel, &learned_kernel(&perception, &history)?)?;
    let mut state = env_rng.random_range(0..n_s);
    let mut trajectory = Vec::with_capacity(config.steps + 1);
    trajectory.push(state);
    let mut rows = Vec::new();
    let mut learned = None;

    for t in 0..config.steps {
        let action = match config.strategy {
            Strategy::Bas => {
                let table =
                    if config.bas.future_uncertainty { Some(entropy_table(&perception, &history)?) } else { None };
                let scores = bas_score(&perception, state, &history, &config.bas, table.as_deref(), &mut policy_rng)?;
                argmax(&scores)
            }
            Strategy::Random => sample_action(&random_policy(n_a), &mut policy_rng),
            Strategy::Boltzmann => {
                let tau = annealed_temperature(config.tau_start, config.tau_end, t, config.steps);
                sample_action(&boltzmann_policy(&history, state, tau)?, &mut policy_rng)
            }
        };
        let next = kernel.step(state, action, &mut env_rng)?;
        history.record(state, action, next)?;
        let counts = history.counts_f64(state, action);
        let loss = perception.train_step(state, action, &counts, config.elbo_mode, &mut elbo_rng)?;
        for _ in 0..config.replay_pairs {
            let (rs, ra) = (replay_rng.random_range(0..n_s), replay_rng.random_range(0..n_a));
            perception.train_step(rs, ra, &history.counts_f64(rs, ra), config.elbo_mode, &mut elbo_rng)?;
        }
        state = next;
        trajectory.push(state);

        let step = t + 1;
        if step % config.log_every == 0 || step == config.steps {
            let k = learned_kernel(&perception, &history)?;
            rows.push(CmcLogRow {
                step,
                strategy: config.strategy,
                seed: config.seed,
                missing_info: missing_information(kernel, &k)?,
                coverage: history.coverage(),
                loss,
            });
            if step == config.steps {
                learned = Some(k);
            }
        }
    }
    let learned = learned.expect("last step is always logged");
    Ok(RunLog { rows, initial_missing_info, trajectory, history, learned })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cmc::kernel::make_dense_world;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_world() -> TransitionKernel {
        make_dense_world(4, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    #[test]
    fn rows_and_determinism() {
        let k = small_world();
        for strategy in [Strategy::Bas, Strategy::Random, Strategy::Boltzmann] {
            let cfg = CmcAgentConfig { strategy, steps: 50, log_every: 1, seed: 9, ..Default::default() };
            let a = run_episode(&cfg, &k).unwrap();
            let b = run_episode(&cfg, &k).unwrap();
            assert_eq!(a.rows.len(), 50);
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.trajectory, b.trajectory);
            assert_eq!(a.history.total(), 50);
        }
    }

    #[test]
    fn sparse_logging_keeps_last_step() {
        let cfg = CmcAgentConfig { steps: 25, log_every: 10, ..Default::default() };
        let log = run_episode(&cfg, &small_world()).unwrap();
        let steps: Vec<usize> = log.rows.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![10, 20, 25]);
    }

    #[test]
    fn csv_header() {
        let cfg = CmcAgentConfig { steps: 3, ..Default::default() };
        let log = run_episode(&cfg, &small_world()).unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,strategy,seed,missing_info,coverage,loss\n1,bas,0,"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn invalid_config_rejected() {
        let k = small_world();
        assert!(run_episode(&CmcAgentConfig { steps: 0, ..Default::default() }, &k).is_err());
        assert!(run_episode(&CmcAgentConfig { tau_end: 0.0, ..Default::default() }, &k).is_err());
    }
}
