use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::activation::ActivationRegistry;
use super::graph::{ActivationLayer, ComputeGraph, Conv1d, Dense, Layer};
use super::NnError;

pub const MODEL_FORMAT: &str = "edl-model";
pub const MODEL_VERSION: u32 = 1;

/// JSON model file: architecture and plaintext weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub id: String,
    pub layers: Vec<ModelLayer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub training: Option<TrainingSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelLayer {
    Conv1d {
        name: String,
        kernel: Vec<Vec<f64>>,
        bias: Vec<f64>,
    },
    Activation {
        name: String,
        kind: String,
    },
    Dense {
        name: String,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub loss_curve: Vec<f64>,
}

impl ModelFile {
    pub fn from_graph(id: impl Into<String>, graph: &ComputeGraph, training: Option<TrainingSummary>) -> Self {
        let layers = graph
            .layers()
            .iter()
            .map(|layer| match layer {
                Layer::Conv1d(c) => ModelLayer::Conv1d {
                    name: c.name.clone(),
                    kernel: c.kernel.clone(),
                    bias: c.bias.clone(),
                },
                Layer::Activation(a) => ModelLayer::Activation {
                    name: a.name.clone(),
                    kind: a.op.name().to_string(),
                },
                Layer::Dense(d) => ModelLayer::Dense {
                    name: d.name.clone(),
                    weights: d.weights.clone(),
                    bias: d.bias.clone(),
                },
            })
            .collect();
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            id: id.into(),
            layers,
            training,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, NnError> {
        let model: Self = serde_json::from_str(text).map_err(|e| NnError::Model(e.to_string()))?;
        if model.format != MODEL_FORMAT {
            return Err(NnError::Model(format!("unexpected format `{}`", model.format)));
        }
        if model.version != MODEL_VERSION {
            return Err(NnError::Model(format!("unsupported version {}", model.version)));
        }
        if model.id.is_empty() {
            return Err(NnError::Model("empty model id".into()));
        }
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn to_graph(&self, activations: &ActivationRegistry) -> Result<ComputeGraph, NnError> {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                Ok(match layer {
                    ModelLayer::Conv1d { name, kernel, bias } => Layer::Conv1d(Conv1d {
                        name: name.clone(),
                        kernel: kernel.clone(),
                        bias: bias.clone(),
                    }),
                    ModelLayer::Activation { name, kind } => Layer::Activation(ActivationLayer {
                        name: name.clone(),
                        op: Arc::clone(&activations.get(kind)?),
                    }),
                    ModelLayer::Dense { name, weights, bias } => Layer::Dense(Dense {
                        name: name.clone(),
                        weights: weights.clone(),
                        bias: bias.clone(),
                    }),
                })
            })
            .collect::<Result<Vec<_>, NnError>>()?;
        ComputeGraph::new(layers)
    }
}
