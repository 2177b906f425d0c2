//! Fully connected autoencoder with sigmoid hidden and code layers and a
//! linear output layer, trained on reconstruction error plus, optionally, a
//! kernel-alignment loss on the codes.

mod backprop;
mod loss;
mod network;
mod train;

pub use backprop::{gradients, Gradients, LossParts};
pub use loss::{code_loss, code_loss_with_grad, combine_losses, reconstruction_loss, total_loss};
pub use network::{init_network, Activation, Autoencoder, Layer};
pub use train::{train, train_with, BatchEvent, Checkpoint, EpochLoss, TrainConfig, TrainHistory};
