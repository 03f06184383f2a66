use std::sync::Arc;

use rand::Rng;

use super::{CkksContext, HeError, PublicKey, RnsPoly, SecretKey};
use crate::ring::{error_coeffs, ternary_coeffs};

/// An encoded (unencrypted) ring element with its scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    poly: RnsPoly,
    scale: f64,
    param_id: u64,
}

impl Plaintext {
    pub fn new(poly: RnsPoly, scale: f64, param_id: u64) -> Self {
        Self {
            poly,
            scale,
            param_id,
        }
    }

    pub fn poly(&self) -> &RnsPoly {
        &self.poly
    }

    pub fn level(&self) -> usize {
        self.poly.level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn param_id(&self) -> u64 {
        self.param_id
    }
}

/// Two ring elements `(c0, c1)` with `c0 + c1*s = m + e`, or three
/// transiently after a product and before relinearization.
///
/// Parts are shared copy-on-write: operations that leave a part unchanged
/// (plaintext addition leaves `c1` alone) share it with their input.
#[derive(Clone, Debug, PartialEq)]
pub struct Ciphertext {
    parts: Vec<Arc<RnsPoly>>,
    scale: f64,
    param_id: u64,
}

impl Ciphertext {
    pub fn from_parts(parts: Vec<RnsPoly>, scale: f64, param_id: u64) -> Result<Self, HeError> {
        Self::from_shared_parts(parts.into_iter().map(Arc::new).collect(), scale, param_id)
    }

    pub(crate) fn from_shared_parts(
        parts: Vec<Arc<RnsPoly>>,
        scale: f64,
        param_id: u64,
    ) -> Result<Self, HeError> {
        if !(2..=3).contains(&parts.len()) {
            return Err(HeError::InvalidParams(format!(
                "ciphertext must have 2 or 3 parts, got {}",
                parts.len()
            )));
        }
        let level = parts[0].level();
        if parts.iter().any(|p| p.level() != level) {
            return Err(HeError::InvalidParams("ciphertext parts at different levels".into()));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(HeError::InvalidParams(format!("ciphertext scale {scale} must be positive")));
        }
        Ok(Self {
            parts,
            scale,
            param_id,
        })
    }

    pub fn parts(&self) -> &[Arc<RnsPoly>] {
        &self.parts
    }

    pub fn level(&self) -> usize {
        self.parts[0].level()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn param_id(&self) -> u64 {
        self.param_id
    }
}

/// Public-key encryptor with the key held in NTT form.
pub struct Encryptor {
    ctx: Arc<CkksContext>,
    b_ntt: RnsPoly,
    a_ntt: RnsPoly,
}

impl Encryptor {
    pub fn new(ctx: Arc<CkksContext>, pk: &PublicKey) -> Result<Self, HeError> {
        if pk.param_id() != ctx.param_id() || pk.b().level() != ctx.max_level() {
            return Err(HeError::ParamMismatch);
        }
        let mut b_ntt = pk.b().clone();
        let mut a_ntt = pk.a().clone();
        b_ntt.forward_ntt(&ctx);
        a_ntt.forward_ntt(&ctx);
        Ok(Self { ctx, b_ntt, a_ntt })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    /// Encrypts at the plaintext's level: `(b*u + e0 + m, a*u + e1)`.
    pub fn encrypt<R: Rng + ?Sized>(&self, pt: &Plaintext, rng: &mut R) -> Result<Ciphertext, HeError> {
        let ctx = &*self.ctx;
        if pt.param_id() != ctx.param_id() {
            return Err(HeError::ParamMismatch);
        }
        let level = pt.level();
        let n = ctx.degree();
        let sigma = ctx.params().error_sigma();
        let mut u = RnsPoly::from_signed(ctx, &ternary_coeffs(n, rng), level);
        u.forward_ntt(ctx);
        let mut c0 = self.b_ntt.truncated(level).pointwise(&u, ctx);
        let mut c1 = self.a_ntt.truncated(level).pointwise(&u, ctx);
        c0.inverse_ntt(ctx);
        c1.inverse_ntt(ctx);
        c0.add_assign(&RnsPoly::from_signed(ctx, &error_coeffs(n, sigma, rng), level), ctx);
        c0.add_assign(pt.poly(), ctx);
        c1.add_assign(&RnsPoly::from_signed(ctx, &error_coeffs(n, sigma, rng), level), ctx);
        Ciphertext::from_parts(vec![c0, c1], pt.scale(), ctx.param_id())
    }
}

/// Secret-key decryptor with `s` held in NTT form.
pub struct Decryptor {
    ctx: Arc<CkksContext>,
    s_ntt: RnsPoly,
}

impl Decryptor {
    pub fn new(ctx: Arc<CkksContext>, sk: &SecretKey) -> Result<Self, HeError> {
        if sk.param_id() != ctx.param_id() || sk.coeffs().len() != ctx.degree() {
            return Err(HeError::ParamMismatch);
        }
        let mut s_ntt = sk.to_rns(&ctx, ctx.max_level());
        s_ntt.forward_ntt(&ctx);
        Ok(Self { ctx, s_ntt })
    }

    /// `c0 + c1*s` at the ciphertext's level.
    pub fn decrypt(&self, ct: &Ciphertext) -> Result<Plaintext, HeError> {
        let ctx = &*self.ctx;
        if ct.param_id() != ctx.param_id() {
            return Err(HeError::ParamMismatch);
        }
        if ct.parts().len() != 2 {
            return Err(HeError::NeedsRelinearization(ct.parts().len()));
        }
        let level = ct.level();
        let mut c1 = RnsPoly::clone(&ct.parts()[1]);
        c1.forward_ntt(ctx);
        let mut m = c1.pointwise(&self.s_ntt.truncated(level), ctx);
        m.inverse_ntt(ctx);
        m.add_assign(&ct.parts()[0], ctx);
        Ok(Plaintext::new(m, ct.scale(), ctx.param_id()))
    }
}

pub fn encrypt<R: Rng + ?Sized>(
    ctx: &Arc<CkksContext>,
    pt: &Plaintext,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<Ciphertext, HeError> {
    Encryptor::new(ctx.clone(), pk)?.encrypt(pt, rng)
}

pub fn decrypt(ctx: &Arc<CkksContext>, ct: &Ciphertext, sk: &SecretKey) -> Result<Plaintext, HeError> {
    Decryptor::new(ctx.clone(), sk)?.decrypt(ct)
}
