use std::sync::Arc;

use super::NnError;
use crate::backend::{Backend, Tensor};
use crate::registry::Registry;

/// `(c0, c1, c3)` of `c0 + c1*x + c3*x^3`.
pub const APPROX_COEFFS: (f64, f64, f64) = (0.5, 0.197, -0.004);

/// Largest `|sigmoid_true - sigmoid_approx|` on the grid `-5, -4.99, .., 5`,
/// reached at `x = ±3.83`.
pub const APPROX_MAX_DEVIATION: f64 = 0.051_030_774_711_013_58;

pub fn sigmoid_true(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Derivative of the logistic sigmoid written in terms of its output `s`.
pub fn sigmoid_true_derivative(s: f64) -> f64 {
    (1.0 - s) * s
}

pub fn sigmoid_approx(x: f64) -> f64 {
    let (c0, c1, c3) = APPROX_COEFFS;
    c0 + c1 * x + c3 * x * x * x
}

pub fn sigmoid_approx_derivative(x: f64) -> f64 {
    let (_, c1, c3) = APPROX_COEFFS;
    c1 + 3.0 * c3 * x * x
}

pub trait Activation: Send + Sync {
    fn name(&self) -> &'static str;

    fn eval(&self, x: f64) -> f64;

    /// Derivative with respect to the pre-activation `x`.
    fn derivative(&self, x: f64) -> f64;

    /// Levels consumed on a backend, or `None` if it cannot run there.
    fn depth(&self) -> Option<usize>;

    fn apply(&self, backend: &dyn Backend, x: &Tensor) -> Result<Tensor, NnError>;
}

pub struct SigmoidTrue;

impl Activation for SigmoidTrue {
    fn name(&self) -> &'static str {
        "sigmoid"
    }

    fn eval(&self, x: f64) -> f64 {
        sigmoid_true(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        sigmoid_true_derivative(sigmoid_true(x))
    }

    fn depth(&self) -> Option<usize> {
        None
    }

    // Needs division; the reference backend refuses it too so both paths
    // fail identically.
    fn apply(&self, _backend: &dyn Backend, _x: &Tensor) -> Result<Tensor, NnError> {
        Err(NnError::UnsupportedOnEncrypted {
            activation: self.name().to_string(),
        })
    }
}

pub struct SigmoidApprox;

impl Activation for SigmoidApprox {
    fn name(&self) -> &'static str {
        "sigmoid-approx"
    }

    fn eval(&self, x: f64) -> f64 {
        sigmoid_approx(x)
    }

    fn derivative(&self, x: f64) -> f64 {
        sigmoid_approx_derivative(x)
    }

    fn depth(&self) -> Option<usize> {
        Some(3)
    }

    fn apply(&self, backend: &dyn Backend, x: &Tensor) -> Result<Tensor, NnError> {
        let node = |source| NnError::Node {
            node: self.name().to_string(),
            source,
        };
        let slots = backend.params().slot_count();
        let (c0, c1, c3) = APPROX_COEFFS;
        let x2 = backend.mul(x, x).map_err(node)?;
        let x_low = backend.mod_switch_to(x, x2.level()).map_err(node)?;
        let x3 = backend.mul(&x2, &x_low).map_err(node)?;
        let cubic = backend.mul_plain(&x3, &vec![c3; slots], None).map_err(node)?;
        // The linear term joins the cubic one at the same level and scale.
        let x_lin = backend.mod_switch_to(x, x3.level()).map_err(node)?;
        let linear = backend
            .mul_plain(&x_lin, &vec![c1; slots], Some(cubic.scale()))
            .map_err(node)?;
        let sum = backend.add(&cubic, &linear).map_err(node)?;
        backend.add_plain(&sum, &vec![c0; slots]).map_err(node)
    }
}

/// Activations by name; `sigmoid` and `sigmoid-approx` are built in.
#[derive(Clone)]
pub struct ActivationRegistry {
    inner: Registry<Arc<dyn Activation>>,
}

impl Default for ActivationRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(SigmoidTrue)).expect("fresh registry");
        r.register(Arc::new(SigmoidApprox)).expect("fresh registry");
        r
    }
}

impl ActivationRegistry {
    pub fn empty() -> Self {
        Self {
            inner: Registry::new("activation"),
        }
    }

    pub fn register(&mut self, activation: Arc<dyn Activation>) -> Result<(), NnError> {
        Ok(self.inner.register(activation.name(), activation)?)
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Activation>, NnError> {
        Ok(self.inner.get(name)?.clone())
    }

    pub fn names(&self) -> Vec<&str> {
        self.inner.names()
    }
}
