//! Dilated causal temporal convolutional forecaster.
//!
//! Each residual block is two causal convolutions with ReLU and a skip
//! connection (1×1 projection when the channel count changes). A linear
//! head reads the last time step and predicts the next observation.

mod arch;
mod backprop;
mod model;
mod train;

pub use arch::TcnArch;
pub use backprop::loss_and_grads;
pub use model::{Block, Conv, Dense, TcnModel};
pub use train::{dataset_mse, train, DIVERGENCE_RATIO, EpochRecord, TrainConfig, TrainReport};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ForecastError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("window has {got} rows, receptive field needs {need}")]
    WindowTooShort { got: usize, need: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("dataset has {got} windows, need at least {need}")]
    TooFewWindows { got: usize, need: usize },
}
