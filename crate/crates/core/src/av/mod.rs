//! Active vision: image corpora, the foveated sensor, hierarchical VAE
//! perception, Monte-Carlo value of fixations, and the decision read-out.

pub mod corpus;
pub mod decision;
pub mod foveate;
pub mod idx;
pub mod stitch;
pub mod training;
pub mod vae;
pub mod value;

pub use corpus::{glyph, make_glyph_corpus, ImageCorpus, Split};
pub use decision::{train_classifier, DecisionNet};
pub use foveate::{foveate, FoveationSpec, Glimpse};
pub use idx::load_idx;
pub use stitch::{central_grid, generate_stitched};
pub use training::{
    evaluate, run_av_training, run_trial, AvConfig, AvLogRow, AvModel, AvRun, AvRunLog, AvStrategy, EvalMetrics,
};
pub use vae::{EncodeStep, HierarchicalVae, TrialMode, TrialRecord, VaeDims};
pub use value::{approx_value, uniform_location, ActionNet, BasStep, ValueNoise};
