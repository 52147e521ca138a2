//! Network definition, forward pass, objectives, initializers and the
//! synthetic regression datasets.

mod activation;
mod data;
mod init;
mod network;

pub use activation::{Activation, Bounds, SIGMOID_PSI2, TANH_PSI2};
pub use data::{gen_l1, gen_oscillation, oscillation, split_train_test, Dataset};
pub use init::Init;
pub use network::{forward, mse, objective, predict, NetworkShape};
