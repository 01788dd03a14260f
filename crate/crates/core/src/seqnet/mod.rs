//! Stacked LSTM identifier mapping seven coded factors to a force profile.
//!
//! The factors are fed as a seven-step scalar sequence; the top layer's last
//! hidden state passes through a dense head that emits the whole profile.
//! Everything runs in `f64` and training is full-batch Adam on normalized
//! mean squared error, so results are bit-reproducible for a given seed.

pub mod adam;
mod bptt;
pub mod gradcheck;
pub mod model;
mod network;
pub mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_with, gradient_pairs, GradientPair};
pub use model::{init, init_with, CellParams, Gradients, NetConfig, NetParams, Norm, SeqNetModel};
pub use network::mse;
pub use train::{split_indices, train, TrainConfig, TrainReport};
