//! Evaluation backends: the same level/scale-tracked arithmetic interface
//! implemented over ciphertexts ([`CkksBackend`]) and over clear slot
//! vectors ([`ReferenceBackend`]), selectable by name through
//! [`BackendRegistry`].

mod ckks;
mod reference;

pub use self::ckks::CkksBackend;
pub use reference::{ClearTensor, ReferenceBackend};

use crate::ckks::{Ciphertext, HeError, HeParams, RelinKey};
use crate::registry::{Registry, RegistryError};

/// A value flowing through an evaluation graph.
#[derive(Clone, Debug, PartialEq)]
pub enum Tensor {
    Encrypted(Ciphertext),
    Clear(ClearTensor),
}

impl Tensor {
    pub fn level(&self) -> usize {
        match self {
            Tensor::Encrypted(ct) => ct.level(),
            Tensor::Clear(t) => t.level(),
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            Tensor::Encrypted(ct) => ct.scale(),
            Tensor::Clear(t) => t.scale(),
        }
    }

    pub fn is_encrypted(&self) -> bool {
        matches!(self, Tensor::Encrypted(_))
    }

    pub fn into_ciphertext(self) -> Option<Ciphertext> {
        match self {
            Tensor::Encrypted(ct) => Some(ct),
            Tensor::Clear(_) => None,
        }
    }

    pub fn as_clear(&self) -> Option<&ClearTensor> {
        match self {
            Tensor::Clear(t) => Some(t),
            Tensor::Encrypted(_) => None,
        }
    }
}

/// Slot-wise arithmetic with CKKS level and scale bookkeeping.
///
/// Plaintext operands are passed as raw slot values and encoded by the
/// backend at the level of the tensor they meet.
pub trait Backend: Send + Sync {
    fn name(&self) -> &'static str;

    fn params(&self) -> &HeParams;

    fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, HeError>;

    /// Adds `values` encoded at `a`'s level and scale.
    fn add_plain(&self, a: &Tensor, values: &[f64]) -> Result<Tensor, HeError>;

    /// Product followed by a rescale; consumes one level.
    fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, HeError>;

    /// Product with `values` followed by a rescale. With `output_scale`, the
    /// plaintext is encoded at whatever scale makes the result land exactly
    /// on it; otherwise at the default scale.
    fn mul_plain(&self, a: &Tensor, values: &[f64], output_scale: Option<f64>) -> Result<Tensor, HeError>;

    fn rescale(&self, a: &Tensor) -> Result<Tensor, HeError>;

    fn mod_switch_to(&self, a: &Tensor, level: usize) -> Result<Tensor, HeError>;
}

pub(crate) fn plaintext_scale(params: &HeParams, a: &Tensor, output_scale: Option<f64>) -> f64 {
    match output_scale {
        Some(target) => crate::ckks::rules::plaintext_scale_for(params, a.level(), a.scale(), target),
        None => params.scale(),
    }
}

pub type BackendFactory = fn(&HeParams, Option<&RelinKey>) -> Result<Box<dyn Backend>, HeError>;

/// Backends registered by name. `ckks` and `reference` are built in.
pub struct BackendRegistry {
    inner: Registry<BackendFactory>,
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut inner = Registry::new("backend");
        inner
            .register(CkksBackend::NAME, CkksBackend::factory as BackendFactory)
            .expect("fresh registry");
        inner
            .register(ReferenceBackend::NAME, ReferenceBackend::factory as BackendFactory)
            .expect("fresh registry");
        Self { inner }
    }
}

impl BackendRegistry {
    pub fn empty() -> Self {
        Self {
            inner: Registry::new("backend"),
        }
    }

    pub fn register(&mut self, name: &str, factory: BackendFactory) -> Result<(), RegistryError> {
        self.inner.register(name, factory)
    }

    pub fn names(&self) -> Vec<&str> {
        self.inner.names()
    }

    pub fn create(
        &self,
        name: &str,
        params: &HeParams,
        relin_key: Option<&RelinKey>,
    ) -> Result<Box<dyn Backend>, BackendError> {
        let factory = self.inner.get(name)?;
        Ok(factory(params, relin_key)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    He(#[from] HeError),
}
