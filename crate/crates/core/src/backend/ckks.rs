use std::sync::Arc;

use super::{plaintext_scale, Backend, Tensor};
use crate::ckks::{encode, CkksContext, Ciphertext, Evaluator, HeError, HeParams, RelinKey};

/// Homomorphic evaluation over ciphertexts. Never holds a secret key.
pub struct CkksBackend {
    ctx: Arc<CkksContext>,
    eval: Evaluator,
}

impl CkksBackend {
    pub const NAME: &'static str = "ckks";

    pub fn new(params: &HeParams, relin_key: Option<&RelinKey>) -> Result<Self, HeError> {
        let ctx = CkksContext::new(params)?;
        let eval = Evaluator::new(ctx.clone(), relin_key)?;
        Ok(Self { ctx, eval })
    }

    pub(crate) fn factory(params: &HeParams, relin_key: Option<&RelinKey>) -> Result<Box<dyn Backend>, HeError> {
        Ok(Box::new(Self::new(params, relin_key)?))
    }

    pub fn evaluator(&self) -> &Evaluator {
        &self.eval
    }

    fn ct<'a>(&self, t: &'a Tensor) -> Result<&'a Ciphertext, HeError> {
        match t {
            Tensor::Encrypted(ct) => Ok(ct),
            Tensor::Clear(_) => Err(HeError::BackendMismatch { backend: Self::NAME }),
        }
    }
}

impl Backend for CkksBackend {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn params(&self) -> &HeParams {
        self.ctx.params()
    }

    fn add(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, HeError> {
        Ok(Tensor::Encrypted(self.eval.add(self.ct(a)?, self.ct(b)?)?))
    }

    fn add_plain(&self, a: &Tensor, values: &[f64]) -> Result<Tensor, HeError> {
        let ct = self.ct(a)?;
        let pt = encode(&self.ctx, values, ct.scale(), ct.level())?;
        Ok(Tensor::Encrypted(self.eval.add_plain(ct, &pt)?))
    }

    fn mul(&self, a: &Tensor, b: &Tensor) -> Result<Tensor, HeError> {
        Ok(Tensor::Encrypted(self.eval.mul(self.ct(a)?, self.ct(b)?)?))
    }

    fn mul_plain(&self, a: &Tensor, values: &[f64], output_scale: Option<f64>) -> Result<Tensor, HeError> {
        let ct = self.ct(a)?;
        let pt_scale = plaintext_scale(self.params(), a, output_scale);
        crate::ckks::rules::product(self.params(), "multiply_plain", ct.level(), ct.scale(), pt_scale)?;
        let pt = encode(&self.ctx, values, pt_scale, ct.level())?;
        Ok(Tensor::Encrypted(self.eval.mul_plain(ct, &pt)?))
    }

    fn rescale(&self, a: &Tensor) -> Result<Tensor, HeError> {
        Ok(Tensor::Encrypted(self.eval.rescale(self.ct(a)?)?))
    }

    fn mod_switch_to(&self, a: &Tensor, level: usize) -> Result<Tensor, HeError> {
        Ok(Tensor::Encrypted(self.eval.mod_switch_to(self.ct(a)?, level)?))
    }
}
