//! Reverse-mode differentiation, dense networks, optimizers and parameter
//! checkpoints.

mod checkpoint;
mod composite;
pub mod gradcheck;
mod net;
mod optim;
mod params;
mod tape;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader};
pub use gradcheck::{check_parameter_gradients, gradient_check, GradCheckReport};
pub use net::{Activation, BoundNet, DenseNet, POSITIVE_FLOOR};
pub use optim::{Optimizer, OptimizerKind};
pub use params::{bind_params, Parameters, Tensor};
pub use tape::{Gradients, Tape, Var};
