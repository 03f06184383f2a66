use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::graph::{ComputeGraph, Layer};
use super::NnError;

/// One training example: `window[t][feature]` and its target.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub window: Vec<Vec<f64>>,
    pub target: f64,
}

/// Values kept from a plaintext forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    window: Vec<Vec<f64>>,
    /// Input lanes of every layer after the convolution.
    inputs: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn prediction(&self) -> f64 {
        self.output.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub learning_rate: f64,
    pub iteration: u64,
}

impl TrainState {
    pub fn new(learning_rate: f64) -> Result<Self, NnError> {
        if !(learning_rate.is_finite() && learning_rate > 0.0) {
            return Err(NnError::InvalidLearningRate(learning_rate));
        }
        Ok(Self {
            learning_rate,
            iteration: 0,
        })
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Parameters whose names start with any of these prefixes stay fixed.
    pub frozen: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// MSE before training, then after each epoch.
    pub loss_curve: Vec<f64>,
    pub state: TrainState,
}

impl ComputeGraph {
    pub fn forward_plain(&self, window: &[Vec<f64>]) -> Result<ForwardCache, NnError> {
        if window.len() != self.window_length() || window.iter().any(|x| x.len() != self.feature_count()) {
            return Err(NnError::Shape(format!(
                "expected a {}x{} window",
                self.window_length(),
                self.feature_count()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers().len() - 1);
        let mut lane: Vec<f64> = Vec::new();
        for layer in self.layers() {
            lane = match layer {
                Layer::Conv1d(c) => (0..self.feature_count())
                    .map(|f| c.bias[f] + (0..self.window_length()).map(|t| c.kernel[t][f] * window[t][f]).sum::<f64>())
                    .collect(),
                Layer::Activation(a) => {
                    let out = lane.iter().map(|&x| a.op.eval(x)).collect();
                    inputs.push(std::mem::take(&mut lane));
                    out
                }
                Layer::Dense(d) => {
                    let out = lane.iter().enumerate().map(|(f, &x)| d.weights[f] * x + d.bias[f]).collect();
                    inputs.push(std::mem::take(&mut lane));
                    out
                }
            };
        }
        Ok(ForwardCache {
            window: window.to_vec(),
            inputs,
            output: lane,
        })
    }

    pub fn predict(&self, window: &[Vec<f64>]) -> Result<f64, NnError> {
        Ok(self.forward_plain(window)?.prediction())
    }

    /// All trainable parameters in a fixed order, see [`Self::parameter_names`].
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in self.layers() {
            match layer {
                Layer::Conv1d(c) => {
                    c.kernel.iter().for_each(|row| out.extend(row));
                    out.extend(&c.bias);
                }
                Layer::Dense(d) => {
                    out.extend(&d.weights);
                    out.extend(&d.bias);
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    pub fn parameter_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for layer in self.layers() {
            match layer {
                Layer::Conv1d(c) => {
                    for (t, row) in c.kernel.iter().enumerate() {
                        out.extend((0..row.len()).map(|f| format!("{}.kernel[{t}][{f}]", c.name)));
                    }
                    out.extend((0..c.bias.len()).map(|f| format!("{}.bias[{f}]", c.name)));
                }
                Layer::Dense(d) => {
                    out.extend((0..d.weights.len()).map(|f| format!("{}.weight[{f}]", d.name)));
                    out.extend((0..d.bias.len()).map(|f| format!("{}.bias[{f}]", d.name)));
                }
                Layer::Activation(_) => {}
            }
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<(), NnError> {
        let expected = self.parameters().len();
        if values.len() != expected {
            return Err(NnError::Shape(format!("expected {expected} parameters, got {}", values.len())));
        }
        let mut it = values.iter().copied();
        for layer in self.layers_mut() {
            let slots: Vec<&mut f64> = match layer {
                Layer::Conv1d(c) => c.kernel.iter_mut().flatten().chain(c.bias.iter_mut()).collect(),
                Layer::Dense(d) => d.weights.iter_mut().chain(d.bias.iter_mut()).collect(),
                Layer::Activation(_) => Vec::new(),
            };
            for slot in slots {
                *slot = it.next().expect("length checked");
            }
        }
        Ok(())
    }
}

/// Gradients of every parameter, in [`ComputeGraph::parameters`] order,
/// given `d loss / d prediction`.
pub fn backward(graph: &ComputeGraph, cache: &ForwardCache, loss_gradient: f64) -> Result<Vec<f64>, NnError> {
    let layers = graph.layers();
    if cache.inputs.len() != layers.len() - 1 || cache.window.len() != graph.window_length() {
        return Err(NnError::MissingCache(format!(
            "cache holds {} layer inputs, graph has {} layers after the convolution",
            cache.inputs.len(),
            layers.len() - 1
        )));
    }
    let features = graph.feature_count();
    // The prediction sums the output lanes.
    let mut upstream = vec![loss_gradient; features];
    let mut per_layer: Vec<Vec<f64>> = vec![Vec::new(); layers.len()];
    for (i, layer) in layers.iter().enumerate().rev() {
        match layer {
            Layer::Dense(d) => {
                let x = &cache.inputs[i - 1];
                let mut g: Vec<f64> = (0..features).map(|f| upstream[f] * x[f]).collect();
                g.extend(&upstream);
                per_layer[i] = g;
                upstream = (0..features).map(|f| upstream[f] * d.weights[f]).collect();
            }
            Layer::Activation(a) => {
                let x = &cache.inputs[i - 1];
                upstream = (0..features).map(|f| upstream[f] * a.op.derivative(x[f])).collect();
            }
            Layer::Conv1d(_) => {
                let mut g = Vec::with_capacity((graph.window_length() + 1) * features);
                for x_t in &cache.window {
                    g.extend((0..features).map(|f| upstream[f] * x_t[f]));
                }
                g.extend(&upstream);
                per_layer[i] = g;
            }
        }
    }
    Ok(per_layer.concat())
}

/// `w <- w - l * grad`, then advances the iteration counter.
pub fn sgd_update(graph: &mut ComputeGraph, gradients: &[f64], state: &mut TrainState) -> Result<(), NnError> {
    TrainState::new(state.learning_rate)?;
    let params = graph.parameters();
    if gradients.len() != params.len() {
        return Err(NnError::Shape(format!(
            "expected {} gradients, got {}",
            params.len(),
            gradients.len()
        )));
    }
    if let Some(i) = gradients.iter().position(|g| !g.is_finite()) {
        return Err(NnError::NonFiniteGradient {
            parameter: graph.parameter_names()[i].clone(),
            value: gradients[i],
        });
    }
    let updated: Vec<f64> = params
        .iter()
        .zip(gradients)
        .map(|(w, g)| w - state.learning_rate * g)
        .collect();
    graph.set_parameters(&updated)?;
    state.iteration += 1;
    Ok(())
}

pub fn mse(graph: &ComputeGraph, data: &[Sample]) -> Result<f64, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut total = 0.0;
    for s in data {
        let e = graph.predict(&s.window)? - s.target;
        total += e * e;
    }
    Ok(total / data.len() as f64)
}

/// Per-sample SGD on squared error, visiting samples in a seeded shuffled
/// order each epoch.
pub fn train(graph: &mut ComputeGraph, data: &[Sample], options: &TrainOptions) -> Result<TrainOutcome, NnError> {
    let mut state = TrainState::new(options.learning_rate)?;
    let frozen: Vec<bool> = graph
        .parameter_names()
        .iter()
        .map(|n| options.frozen.iter().any(|p| n.starts_with(p.as_str())))
        .collect();
    let mut loss_curve = vec![mse(graph, data)?];
    let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let cache = graph.forward_plain(&data[i].window)?;
            let dloss = 2.0 * (cache.prediction() - data[i].target);
            let mut grads = backward(graph, &cache, dloss)?;
            for (g, &fixed) in grads.iter_mut().zip(&frozen) {
                if fixed {
                    *g = 0.0;
                }
            }
            sgd_update(graph, &grads, &mut state)?;
        }
        let loss = mse(graph, data)?;
        if !loss.is_finite() {
            return Err(NnError::NonFiniteLoss { epoch });
        }
        loss_curve.push(loss);
    }
    Ok(TrainOutcome { loss_curve, state })
}
