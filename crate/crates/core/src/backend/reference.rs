use super::{plaintext_scale, Backend, Tensor};
use crate::ckks::{check_encoding_bound, rules, CkksContext, HeError, HeParams, RelinKey};
use std::sync::Arc;

/// Clear slot values carrying the level and scale a ciphertext would have.
#[derive(Clone, Debug, PartialEq)]
pub struct ClearTensor {
    values: Vec<f64>,
    level: usize,
    scale: f64,
}

impl ClearTensor {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Plaintext oracle: evaluates on clear slot vectors with the same
/// bookkeeping rules, and the same failures, as [`super::CkksBackend`].
pub struct ReferenceBackend {
    ctx: Arc<CkksContext>,
}

impl ReferenceBackend {
    pub const NAME: &'static str = "reference";

    pub fn new(params: &HeParams) -> Result<Self, HeError> {
        Ok(Self {
            ctx: CkksContext::new(params)?,
        })
    }

    pub(crate) fn factory(params: &HeParams, _relin_key: Option<&RelinKey>) -> Result<Box<dyn Backend>, HeError> {
        Ok(Box::new(Self::new(params)?))
    }

    /// The clear counterpart of a fresh encryption: top level, default scale.
    pub fn fresh(&self, values: &[f64]) -> Result<Tensor, HeError> {
        let p = self.ctx.params();
        self.at(values, p.max_level(), p.scale())
    }

    pub fn at(&self, values: &[f64], level: usize, scale: f64) -> Result<Tensor, HeError> {
        self.ctx.check_level(level)?;
        check_encoding_bound(&self.ctx, values, scale, level)?;
        Ok(Tensor::Clear(ClearTensor {
            values: self.padded(values),
            level,
            scale,
        }))
    }

    fn padded(&self, values: &[f64]) -> Vec<f64> {
        let mut v = values.to_vec();
        v.resize(self.ctx.params().slot_count(), 0.0);
        v
    }

    fn clear<'a>(&self, t: &'a Tensor) -> Result<&'a ClearTensor, HeError> {
        t.as_clear().ok_or(HeError::BackendMismatch { backend: Self::NAME })
    }
}

impl Backend for ReferenceBackend {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn params(&self) -> &HeParams {
        self.ctx.params()
    }

    fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, HeError> {
        let (a, b) = (self.clear(a)?, self.clear(b)?);
        let level = rules::same_level(a.level, b.level)?;
        rules::same_scale(a.scale, b.scale)?;
        Ok(Tensor::Clear(ClearTensor {
            values: a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
            level,
            scale: a.scale,
        }))
    }

    fn add_plain(&self, a: &Tensor, values: &[f64]) -> Result<Tensor, HeError> {
        let a = self.clear(a)?;
        check_encoding_bound(&self.ctx, values, a.scale, a.level)?;
        let values = self.padded(values);
        Ok(Tensor::Clear(ClearTensor {
            values: a.values.iter().zip(&values).map(|(x, y)| x + y).collect(),
            level: a.level,
            scale: a.scale,
        }))
    }

    fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, HeError> {
        let (a, b) = (self.clear(a)?, self.clear(b)?);
        let level = rules::same_level(a.level, b.level)?;
        let (level, scale) = rules::product(self.params(), "multiply", level, a.scale, b.scale)?;
        Ok(Tensor::Clear(ClearTensor {
            values: a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
            level,
            scale,
        }))
    }

    fn mul_plain(&self, a: &Tensor, values: &[f64], output_scale: Option<f64>) -> Result<Tensor, HeError> {
        let pt_scale = plaintext_scale(self.params(), a, output_scale);
        let a = self.clear(a)?;
        let (level, scale) = rules::product(self.params(), "multiply_plain", a.level, a.scale, pt_scale)?;
        check_encoding_bound(&self.ctx, values, pt_scale, a.level)?;
        let values = self.padded(values);
        Ok(Tensor::Clear(ClearTensor {
            values: a.values.iter().zip(&values).map(|(x, y)| x * y).collect(),
            level,
            scale,
        }))
    }

    fn rescale(&self, a: &Tensor) -> Result<Tensor, HeError> {
        let a = self.clear(a)?;
        let (level, scale) = rules::rescale(self.params(), a.level, a.scale)?;
        Ok(Tensor::Clear(ClearTensor {
            values: a.values.clone(),
            level,
            scale,
        }))
    }

    fn mod_switch_to(&self, a: &Tensor, level: usize) -> Result<Tensor, HeError> {
        let a = self.clear(a)?;
        let level = rules::switch(a.level, level)?;
        Ok(Tensor::Clear(ClearTensor {
            values: a.values.clone(),
            level,
            scale: a.scale,
        }))
    }
}
