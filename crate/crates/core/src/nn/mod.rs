//! Multilayer perceptron, Adam training and Jacobians.

mod jacobian;
mod mlp;
mod train;

pub use jacobian::Jacobian;
pub use mlp::{softmax, Basis, Forward, MlpModel};
pub use train::{accuracy, loss_and_gradient, mean_loss, train, Gradients, TrainConfig};
