//! Trainable classical readout.

pub mod mlp;
pub mod train;

pub use mlp::{argmax, cross_entropy, softmax, GradientTarget, Layer, Mlp, Mode};
pub use train::{accuracy, fit, train, Adam, EpochMetrics, TrainConfig};
