//! Controllable Markov chains: environments, metrics, the Dirichlet
//! perception network and information-gain exploration.

pub mod episode;
pub mod history;
pub mod kernel;
pub mod maze;
pub mod metrics;
pub mod perception;
pub mod policy;

pub use episode::{learned_kernel, run_episode, CmcAgentConfig, CmcLogRow, RunLog};
pub use history::HistoryTensor;
pub use kernel::{make_dense_world, TransitionKernel};
pub use maze::{make_maze, Direction, MazeSpec};
pub use metrics::{max_normalized, missing_information, visitation_map};
pub use perception::{
    cmc_elbo, CmcPerception, ConjugatePosterior, CountEncoding, ElboMode, PerceptionConfig, PosteriorModel,
};
pub use policy::{bas_score, boltzmann_policy, random_policy, BasConfig, PredictiveWeights, Strategy};
