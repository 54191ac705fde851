//! Small dense neural-network engine.
//!
//! Networks are stored as plain `ndarray` matrices in 64-bit floats. Layers
//! run forward over a batch (rows are samples) and record the activations
//! they need; the matching `backward` routines implement reverse-mode
//! differentiation layer by layer. [`AdamState`] updates any type that
//! implements [`Params`].

mod activation;
pub mod adam;
pub mod checkpoint;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod init;
pub mod mlp;
pub mod params;

pub use activation::Activation;
pub use adam::{AdamConfig, AdamState};
pub use conv::Conv1d;
pub use dense::Dense;
pub use dropout::Dropout;
pub use init::glorot_uniform;
pub use mlp::{Mlp, MlpTape};
pub use params::Params;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by layer {layer}")]
    NonFinite { layer: usize },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = NnError> = std::result::Result<T, E>;
