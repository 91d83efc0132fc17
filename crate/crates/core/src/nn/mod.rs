//! A minimal dense classifier with manual backpropagation.
//!
//! Layout: `input -> [Dense -> ReLU]* -> Dense -> features -> head -> logits`.
//! The last dense layer has no activation; its output is the feature vector
//! the head consumes.

mod checkpoint;
mod head;
mod layer;
mod loss;
mod network;
mod optim;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointHeader, TensorEntry};
pub use head::{Head, HeadKind};
pub use layer::{DenseLayer, Param};
pub use loss::{log_sum_exp, softmax_cross_entropy, softmax_row};
pub use network::{argmax_rows, Architecture, ForwardCache, ForwardOutput, Network};
pub use optim::{lr_at, sgd_step, OptimizerConfig, Schedule};
pub use train::{train, EpochRecord, TrainingLog};
