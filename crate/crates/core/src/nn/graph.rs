use std::fmt;
use std::sync::Arc;

use super::activation::{Activation, ActivationRegistry};
use super::NnError;
use crate::backend::{Backend, Tensor};

/// Value carried by the last slot of every input vector.
pub const SENTINEL: f64 = 0.5;

/// Kernel `[t][feature]` and bias `[feature]`; one output lane per feature.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub name: String,
    pub kernel: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

/// Slot-wise `w * x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub name: String,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone)]
pub struct ActivationLayer {
    pub name: String,
    pub op: Arc<dyn Activation>,
}

impl fmt::Debug for ActivationLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActivationLayer")
            .field("name", &self.name)
            .field("kind", &self.op.name())
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Layer {
    Conv1d(Conv1d),
    Activation(ActivationLayer),
    Dense(Dense),
}

impl Layer {
    pub fn name(&self) -> &str {
        match self {
            Layer::Conv1d(l) => &l.name,
            Layer::Activation(l) => &l.name,
            Layer::Dense(l) => &l.name,
        }
    }

    /// Levels consumed on a backend, `None` if the layer cannot run there.
    pub fn depth(&self) -> Option<usize> {
        match self {
            Layer::Conv1d(_) | Layer::Dense(_) => Some(1),
            Layer::Activation(a) => a.op.depth(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceEntry {
    pub node: String,
    pub level: usize,
    pub scale: f64,
}

#[derive(Clone, Debug)]
pub struct Forward {
    pub output: Tensor,
    pub trace: Vec<TraceEntry>,
}

/// A convolution over the whole window followed by slot-wise layers.
#[derive(Clone, Debug)]
pub struct ComputeGraph {
    window_length: usize,
    feature_count: usize,
    layers: Vec<Layer>,
}

impl ComputeGraph {
    pub fn new(layers: Vec<Layer>) -> Result<Self, NnError> {
        let Some(Layer::Conv1d(conv)) = layers.first() else {
            return Err(NnError::Shape("the first layer must be a conv1d".into()));
        };
        let window_length = conv.kernel.len();
        let feature_count = conv.bias.len();
        if window_length == 0 || feature_count == 0 {
            return Err(NnError::Shape("empty conv kernel".into()));
        }
        let mut names = std::collections::HashSet::new();
        for (i, layer) in layers.iter().enumerate() {
            if !names.insert(layer.name().to_string()) {
                return Err(NnError::Shape(format!("duplicate node name `{}`", layer.name())));
            }
            match layer {
                Layer::Conv1d(c) if i > 0 => {
                    return Err(NnError::Shape(format!("conv1d `{}` must come first", c.name)));
                }
                Layer::Conv1d(c) => {
                    if c.kernel.iter().any(|row| row.len() != feature_count) {
                        return Err(NnError::Shape(format!("ragged kernel in `{}`", c.name)));
                    }
                    check_finite(&c.name, c.kernel.iter().flatten().chain(&c.bias))?;
                }
                Layer::Dense(d) => {
                    if d.weights.len() != feature_count || d.bias.len() != feature_count {
                        return Err(NnError::Shape(format!(
                            "dense `{}` expects {feature_count} weights and biases",
                            d.name
                        )));
                    }
                    check_finite(&d.name, d.weights.iter().chain(&d.bias))?;
                }
                Layer::Activation(_) => {}
            }
        }
        Ok(Self {
            window_length,
            feature_count,
            layers,
        })
    }

    /// Window 3, one filter, `sigmoid-approx`, one dense output stage, with
    /// small seeded weights.
    pub fn reference(feature_count: usize, seed: u64) -> Result<Self, NnError> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-0.5..0.5)).collect() };
        let kernel = (0..3).map(|_| draw(feature_count)).collect();
        let dense_w = draw(feature_count);
        let activations = ActivationRegistry::default();
        Self::new(vec![
            Layer::Conv1d(Conv1d {
                name: "conv".into(),
                kernel,
                bias: vec![0.0; feature_count],
            }),
            Layer::Activation(ActivationLayer {
                name: "activation".into(),
                op: activations.get("sigmoid-approx")?,
            }),
            Layer::Dense(Dense {
                name: "dense".into(),
                weights: dense_w,
                bias: vec![0.0; feature_count],
            }),
        ])
    }

    pub fn window_length(&self) -> usize {
        self.window_length
    }

    pub fn feature_count(&self) -> usize {
        self.feature_count
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Total multiplicative depth, or the first node that cannot run on a
    /// backend at all.
    pub fn depth_budget(&self) -> Result<usize, NnError> {
        self.layers.iter().try_fold(0, |acc, layer| {
            layer.depth().map(|d| acc + d).ok_or_else(|| NnError::UnsupportedOnEncrypted {
                activation: layer.name().to_string(),
            })
        })
    }

    /// Fails with the first node whose cumulative depth exceeds `available`.
    pub fn precheck(&self, available: usize) -> Result<(), NnError> {
        let mut used = 0;
        for layer in &self.layers {
            used += layer.depth().ok_or_else(|| NnError::UnsupportedOnEncrypted {
                activation: layer.name().to_string(),
            })?;
            if used > available {
                return Err(NnError::DepthExceeded {
                    node: layer.name().to_string(),
                    required: used,
                    available,
                });
            }
        }
        Ok(())
    }

    /// Output of the sentinel lane, which passes the sentinel through every
    /// layer with unit weights and zero biases.
    pub fn sentinel_output(&self) -> f64 {
        self.layers.iter().fold(SENTINEL, |x, layer| match layer {
            Layer::Conv1d(_) | Layer::Dense(_) => x,
            Layer::Activation(a) => a.op.eval(x),
        })
    }

    /// Slot vector of one timestep: features, zero padding, sentinel last.
    pub fn input_slots(&self, features: &[f64], slots: usize) -> Result<Vec<f64>, NnError> {
        if features.len() != self.feature_count {
            return Err(NnError::Shape(format!(
                "expected {} features per timestep, got {}",
                self.feature_count,
                features.len()
            )));
        }
        Ok(lane(features, SENTINEL, slots))
    }

    /// Sums the feature slots of a decoded output vector.
    pub fn read_prediction(&self, slots: &[f64]) -> f64 {
        slots[..self.feature_count].iter().sum()
    }

    /// Precheck, then evaluate.
    pub fn forward(&self, backend: &dyn Backend, window: &[Tensor]) -> Result<Forward, NnError> {
        let level = window.first().map(Tensor::level).unwrap_or(0);
        self.precheck(level)?;
        self.evaluate(backend, window)
    }

    /// Evaluates without the static depth check, so level exhaustion shows up
    /// at the node where the backend hits it.
    pub fn evaluate(&self, backend: &dyn Backend, window: &[Tensor]) -> Result<Forward, NnError> {
        if window.len() != self.window_length {
            return Err(NnError::Shape(format!(
                "window of {} timesteps for a kernel of width {}",
                window.len(),
                self.window_length
            )));
        }
        let slots = backend.params().slot_count();
        if self.feature_count >= slots {
            return Err(NnError::Shape(format!(
                "{} features leave no sentinel slot among {slots}",
                self.feature_count
            )));
        }
        let mut trace = vec![TraceEntry {
            node: "input".into(),
            level: window[0].level(),
            scale: window[0].scale(),
        }];
        let mut current: Option<Tensor> = None;
        for layer in &self.layers {
            let at = |source| NnError::Node {
                node: layer.name().to_string(),
                source,
            };
            let out = match (layer, &current) {
                (Layer::Conv1d(conv), _) => {
                    let mut acc: Option<Tensor> = None;
                    for (t, x) in window.iter().enumerate() {
                        let w = lane(&conv.kernel[t], if t + 1 == self.window_length { 1.0 } else { 0.0 }, slots);
                        let term = backend.mul_plain(x, &w, None).map_err(at)?;
                        acc = Some(match acc {
                            None => term,
                            Some(a) => backend.add(&a, &term).map_err(at)?,
                        });
                    }
                    let acc = acc.expect("non-empty window");
                    backend.add_plain(&acc, &lane(&conv.bias, 0.0, slots)).map_err(at)?
                }
                (Layer::Activation(a), Some(x)) => match a.op.apply(backend, x) {
                    Err(NnError::Node { source, .. }) => return Err(at(source)),
                    Err(NnError::UnsupportedOnEncrypted { .. }) => {
                        return Err(NnError::UnsupportedOnEncrypted {
                            activation: a.name.clone(),
                        })
                    }
                    other => other?,
                },
                (Layer::Dense(d), Some(x)) => {
                    let y = backend.mul_plain(x, &lane(&d.weights, 1.0, slots), None).map_err(at)?;
                    backend.add_plain(&y, &lane(&d.bias, 0.0, slots)).map_err(at)?
                }
                (_, None) => unreachable!("validated: conv1d comes first"),
            };
            trace.push(TraceEntry {
                node: layer.name().to_string(),
                level: out.level(),
                scale: out.scale(),
            });
            current = Some(out);
        }
        Ok(Forward {
            output: current.expect("at least one layer"),
            trace,
        })
    }
}

/// Slot vector of one timestep for any graph: `values`, zero padding, and the
/// sentinel in the last slot. Panics if `values` does not leave room for it.
pub fn pack_timestep(values: &[f64], slots: usize) -> Vec<f64> {
    assert!(values.len() < slots, "{} values leave no room for the sentinel in {slots} slots", values.len());
    lane(values, SENTINEL, slots)
}

fn lane(values: &[f64], sentinel: f64, slots: usize) -> Vec<f64> {
    let mut v = vec![0.0; slots];
    v[..values.len()].copy_from_slice(values);
    v[slots - 1] = sentinel;
    v
}

fn check_finite<'a>(node: &str, mut values: impl Iterator<Item = &'a f64>) -> Result<(), NnError> {
    if values.any(|v| !v.is_finite()) {
        return Err(NnError::Shape(format!("non-finite weight in `{node}`")));
    }
    Ok(())
}
