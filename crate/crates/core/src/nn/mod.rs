//! Encrypted 1D-CNN: a layered compute graph evaluated on any
//! [`Backend`](crate::backend::Backend), plus plaintext training.
//!
//! Every timestep of a window is one slot vector holding the feature values
//! in slots `0..feature_count` and a sentinel in the last slot. Layers act
//! slot-wise; the prediction is the sum of the output feature slots, taken
//! by whoever holds the decrypted result.

mod activation;
mod graph;
mod model;
mod train;

pub use activation::{
    sigmoid_approx, sigmoid_approx_derivative, sigmoid_true, sigmoid_true_derivative, Activation,
    ActivationRegistry, SigmoidApprox, SigmoidTrue, APPROX_COEFFS, APPROX_MAX_DEVIATION,
};
pub use graph::{pack_timestep, ActivationLayer, ComputeGraph, Conv1d, Dense, Forward, Layer, TraceEntry, SENTINEL};
pub use model::{ModelFile, ModelLayer, TrainingSummary, MODEL_FORMAT, MODEL_VERSION};
pub use train::{
    backward, mse, sgd_update, train, ForwardCache, Sample, TrainOptions, TrainOutcome, TrainState,
};

use crate::ckks::HeError;
use crate::registry::RegistryError;

#[derive(Debug, thiserror::Error)]
pub enum NnError {
    #[error("activation `{activation}` cannot be evaluated on encrypted tensors")]
    UnsupportedOnEncrypted { activation: String },
    #[error("node `{node}` needs {required} levels in total but the input has {available}")]
    DepthExceeded {
        node: String,
        required: usize,
        available: usize,
    },
    #[error("node `{node}`: {source}")]
    Node {
        node: String,
        #[source]
        source: HeError,
    },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("training state error: {0}")]
    MissingCache(String),
    #[error("non-finite gradient {value} for parameter `{parameter}`")]
    NonFiniteGradient { parameter: String, value: f64 },
    #[error("loss became non-finite in epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("learning rate must be positive and finite, got {0}")]
    InvalidLearningRate(f64),
    #[error("malformed model: {0}")]
    Model(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}
