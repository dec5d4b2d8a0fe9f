//! Controllable-Markov-chain experiments.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use explore_core::cmc::{
    make_dense_world, make_maze, max_normalized, run_episode, visitation_map, BasConfig, CmcAgentConfig, CountEncoding,
    ElboMode, MazeSpec, Strategy, TransitionKernel,
};
use explore_core::diff::OptimizerKind;
use explore_core::{pgm, seed};
use serde::{Deserialize, Serialize};

use crate::runs::{self, Cell};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Dense,
    Maze,
}

/// A complete CMC experiment. Every field must be present in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmcExperiment {
    pub env: EnvKind,
    /// Number of states (dense) or maze side length (maze).
    pub size: usize,
    /// Actions per state; mazes always have 4.
    pub actions: usize,
    pub steps: usize,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub beta: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub elbo_mode: ElboMode,
    pub count_encoding: CountEncoding,
    pub bas: BasConfig,
    pub tau_start: f64,
    pub tau_end: f64,
    pub replay_pairs: usize,
    pub log_every: usize,
}

pub const DEFAULT_LOG_EVERY: usize = 10;

impl CmcExperiment {
    /// Documented defaults for everything not given on the command line.
    pub fn with_defaults(env: EnvKind, size: usize, steps: usize, strategies: Vec<Strategy>, seeds: Vec<u64>) -> Self {
        let a = CmcAgentConfig::default();
        Self {
            env,
            size,
            actions: 4,
            steps,
            strategies,
            seeds,
            beta: a.beta,
            learning_rate: a.learning_rate,
            optimizer: a.optimizer,
            elbo_mode: a.elbo_mode,
            count_encoding: a.count_encoding,
            bas: a.bas,
            tau_start: a.tau_start,
            tau_end: a.tau_end,
            replay_pairs: a.replay_pairs,
            log_every: DEFAULT_LOG_EVERY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        runs::ensure_unique("strategies", &self.strategies)?;
        runs::ensure_unique("seeds", &self.seeds)?;
        match self.env {
            EnvKind::Dense if self.size < 2 || self.actions < 1 => bail!("dense worlds need ≥ 2 states and ≥ 1 action"),
            EnvKind::Maze if self.size < 2 => bail!("maze side must be ≥ 2"),
            EnvKind::Maze if self.actions != 4 => bail!("mazes have exactly 4 actions, got {}", self.actions),
            _ => {}
        }
        self.agent(Strategy::Bas, 0).validate()?;
        Ok(())
    }

    pub fn agent(&self, strategy: Strategy, seed: u64) -> CmcAgentConfig {
        CmcAgentConfig {
            strategy,
            steps: self.steps,
            beta: self.beta,
            elbo_mode: self.elbo_mode,
            tau_start: self.tau_start,
            tau_end: self.tau_end,
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            count_encoding: self.count_encoding,
            bas: self.bas,
            replay_pairs: self.replay_pairs,
            log_every: self.log_every,
            seed,
        }
    }

    /// The world of a seed; shared by every strategy at that seed.
    pub fn world(&self, seed: u64) -> Result<TransitionKernel> {
        let mut rng = seed::stream(seed, "cmc.world");
        Ok(match self.env {
            EnvKind::Dense => make_dense_world(self.size, self.actions, &mut rng)?,
            EnvKind::Maze => make_maze(&MazeSpec::random(self.size, &mut rng)?, &mut rng)?,
        })
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for s in &self.strategies {
            for &seed in &self.seeds {
                cells.push(Cell { strategy: s.name().to_owned(), seed });
            }
        }
        cells
    }
}

/// Runs every cell and writes run CSVs, heatmaps, the aggregate, the
/// config echo and the manifest under `out`.
pub fn run(exp: &CmcExperiment, out: &Path, jobs: usize) -> Result<()> {
    exp.validate()?;
    runs::prepare_out(out, &["heatmaps"])?;
    runs::write_json(&out.join(runs::CONFIG_FILE), exp)?;
    let cells = exp.cells();
    runs::run_cells(out, "cmc", &cells, jobs, |cell| {
        let strategy: Strategy = cell.strategy.parse()?;
        let kernel = exp.world(cell.seed)?;
        let log = run_episode(&exp.agent(strategy, cell.seed), &kernel)?;
        let mut buf = Vec::new();
        log.write_csv(&mut buf)?;
        fs::write(out.join(runs::RUNS_DIR).join(format!("{}.csv", cell.stem())), buf)?;
        let image = match exp.env {
            EnvKind::Maze => {
                let map = max_normalized(&visitation_map(&log.trajectory, exp.size));
                pgm::encode_unit(exp.size, exp.size, &map)
            }
            EnvKind::Dense => {
                // Rows are (state, action) pairs, columns next states.
                let n = kernel.n_states();
                let diff: Vec<f64> = kernel
                    .rows()
                    .zip(log.learned.rows())
                    .flat_map(|(p, q)| p.iter().zip(q).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
                    .collect();
                pgm::encode_max_normalized(n, n * kernel.n_actions(), &diff)
            }
        };
        pgm::write_file(&out.join("heatmaps").join(format!("{}.pgm", cell.stem())), &image)?;
        Ok(())
    })?;
    runs::write_aggregate(out)
}

pub fn load(path: &Path) -> Result<CmcExperiment> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let exp: CmcExperiment = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    exp.validate()?;
    Ok(exp)
}
