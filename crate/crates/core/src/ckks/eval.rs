use std::sync::Arc;

use super::{scales_match, Ciphertext, CkksContext, HeError, HeParams, Plaintext, RelinKey, RnsPoly};

/// Level and scale rules shared by every evaluation backend, so that the
/// encrypted and reference paths fail in exactly the same places.
pub mod rules {
    use super::*;

    pub fn same_level(left: usize, right: usize) -> Result<usize, HeError> {
        if left != right {
            return Err(HeError::LevelMismatch { left, right });
        }
        Ok(left)
    }

    pub fn same_scale(left: f64, right: f64) -> Result<(), HeError> {
        if !scales_match(left, right) {
            return Err(HeError::ScaleMismatch { left, right });
        }
        Ok(())
    }

    /// Output `(level, scale)` of a rescaled product at `level`.
    pub fn product(
        params: &HeParams,
        op: &'static str,
        level: usize,
        left_scale: f64,
        right_scale: f64,
    ) -> Result<(usize, f64), HeError> {
        if level == 0 {
            return Err(HeError::OutOfLevels { op });
        }
        let log2_scale = left_scale.log2() + right_scale.log2();
        if !log2_scale.is_finite() || log2_scale >= params.log2_modulus(level) - 1.0 {
            return Err(HeError::ScaleOverflow { log2_scale, level });
        }
        let q = params.modulus_chain()[level] as f64;
        Ok((level - 1, left_scale * right_scale / q))
    }

    pub fn rescale(params: &HeParams, level: usize, scale: f64) -> Result<(usize, f64), HeError> {
        if level == 0 {
            return Err(HeError::OutOfLevels { op: "rescale" });
        }
        Ok((level - 1, scale / params.modulus_chain()[level] as f64))
    }

    pub fn switch(from: usize, to: usize) -> Result<usize, HeError> {
        if to > from {
            return Err(HeError::InvalidSwitch { from, to });
        }
        Ok(to)
    }

    /// Plaintext scale that makes `ct_scale * pt_scale / q_level` equal
    /// `target`.
    pub fn plaintext_scale_for(params: &HeParams, level: usize, ct_scale: f64, target: f64) -> f64 {
        target * params.modulus_chain()[level] as f64 / ct_scale
    }
}

struct PreparedRelinKey {
    bits: u32,
    // NTT form, top level
    entries: Vec<Vec<[RnsPoly; 2]>>,
}

/// Homomorphic operations. Holds public evaluation material only.
pub struct Evaluator {
    ctx: Arc<CkksContext>,
    relin: Option<PreparedRelinKey>,
}

impl Evaluator {
    pub fn new(ctx: Arc<CkksContext>, relin_key: Option<&RelinKey>) -> Result<Self, HeError> {
        let relin = match relin_key {
            Some(key) => {
                key.validate(&ctx)?;
                let entries = key
                    .entries()
                    .iter()
                    .map(|row| {
                        row.iter()
                            .map(|pair| {
                                pair.clone().map(|mut p| {
                                    p.forward_ntt(&ctx);
                                    p
                                })
                            })
                            .collect()
                    })
                    .collect();
                Some(PreparedRelinKey {
                    bits: key.decomposition_bits(),
                    entries,
                })
            }
            None => None,
        };
        Ok(Self { ctx, relin })
    }

    pub fn context(&self) -> &Arc<CkksContext> {
        &self.ctx
    }

    pub fn params(&self) -> &HeParams {
        self.ctx.params()
    }

    fn check_ct(&self, ct: &Ciphertext) -> Result<(), HeError> {
        if ct.param_id() != self.ctx.param_id() {
            return Err(HeError::ParamMismatch);
        }
        Ok(())
    }

    fn check_pt(&self, pt: &Plaintext) -> Result<(), HeError> {
        if pt.param_id() != self.ctx.param_id() {
            return Err(HeError::ParamMismatch);
        }
        Ok(())
    }

    fn check_linear(ct: &Ciphertext) -> Result<(), HeError> {
        if ct.parts().len() != 2 {
            return Err(HeError::NeedsRelinearization(ct.parts().len()));
        }
        Ok(())
    }

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        rules::same_level(a.level(), b.level())?;
        rules::same_scale(a.scale(), b.scale())?;
        if a.parts().len() != b.parts().len() {
            return Err(HeError::NeedsRelinearization(a.parts().len().max(b.parts().len())));
        }
        let parts = a
            .parts()
            .iter()
            .zip(b.parts())
            .map(|(x, y)| Arc::new(x.add(y, &self.ctx)))
            .collect();
        Ciphertext::from_shared_parts(parts, a.scale(), a.param_id())
    }

    pub fn negate(&self, a: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_ct(a)?;
        let parts = a.parts().iter().map(|p| p.negate(&self.ctx)).collect();
        Ciphertext::from_parts(parts, a.scale(), a.param_id())
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.add(a, &self.negate(b)?)
    }

    pub fn add_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, HeError> {
        self.check_ct(ct)?;
        self.check_pt(pt)?;
        rules::same_level(ct.level(), pt.level())?;
        rules::same_scale(ct.scale(), pt.scale())?;
        let mut parts = ct.parts().to_vec();
        parts[0] = Arc::new(parts[0].add(pt.poly(), &self.ctx));
        Ciphertext::from_shared_parts(parts, ct.scale(), ct.param_id())
    }

    /// Tensor product `(a0*b0, a0*b1 + a1*b0, a1*b1)`, no relinearization and
    /// no rescale.
    pub fn multiply_no_relin(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        Self::check_linear(a)?;
        Self::check_linear(b)?;
        let level = rules::same_level(a.level(), b.level())?;
        rules::product(self.params(), "multiply", level, a.scale(), b.scale())?;
        let ctx = &*self.ctx;
        let ntt = |p: &RnsPoly| {
            let mut p = p.clone();
            p.forward_ntt(ctx);
            p
        };
        let (a0, a1) = (ntt(&a.parts()[0]), ntt(&a.parts()[1]));
        let (b0, b1) = (ntt(&b.parts()[0]), ntt(&b.parts()[1]));
        let mut d0 = a0.pointwise(&b0, ctx);
        let mut d1 = a0.pointwise(&b1, ctx);
        d1.pointwise_accumulate(&a1, &b0, ctx);
        let mut d2 = a1.pointwise(&b1, ctx);
        for d in [&mut d0, &mut d1, &mut d2] {
            d.inverse_ntt(ctx);
        }
        Ciphertext::from_parts(vec![d0, d1, d2], a.scale() * b.scale(), a.param_id())
    }

    /// Folds the `s^2` term of a 3-part ciphertext back into two parts.
    pub fn relinearize(&self, ct: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_ct(ct)?;
        if ct.parts().len() == 2 {
            return Ok(ct.clone());
        }
        let key = self.relin.as_ref().ok_or(HeError::MissingRelinKey)?;
        let ctx = &*self.ctx;
        let level = ct.level();
        let c2 = &ct.parts()[2];
        let mask = (1u64 << key.bits) - 1;
        let mut acc0 = RnsPoly::zero(ctx, level);
        let mut acc1 = RnsPoly::zero(ctx, level);
        for j in 0..=level {
            for (k, pair) in key.entries[j].iter().enumerate() {
                let shift = key.bits * k as u32;
                let digit: Vec<u64> = c2.residue(j).iter().map(|&x| (x >> shift) & mask).collect();
                let residues = (0..=level)
                    .map(|i| {
                        let m = ctx.modulus(i);
                        digit.iter().map(|&d| m.reduce(d)).collect()
                    })
                    .collect();
                let mut d = RnsPoly::from_residues(residues);
                d.forward_ntt(ctx);
                acc0.pointwise_accumulate(&d, &pair[0], ctx);
                acc1.pointwise_accumulate(&d, &pair[1], ctx);
            }
        }
        acc0.inverse_ntt(ctx);
        acc1.inverse_ntt(ctx);
        let c0 = ct.parts()[0].add(&acc0, ctx);
        let c1 = ct.parts()[1].add(&acc1, ctx);
        Ciphertext::from_parts(vec![c0, c1], ct.scale(), ct.param_id())
    }

    /// Divides by the top prime of the ciphertext's level and drops it.
    pub fn rescale(&self, ct: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_ct(ct)?;
        let (_, scale) = rules::rescale(self.params(), ct.level(), ct.scale())?;
        let parts = ct
            .parts()
            .iter()
            .map(|p| {
                let mut p = RnsPoly::clone(p);
                p.rescale(&self.ctx);
                Arc::new(p)
            })
            .collect();
        Ciphertext::from_shared_parts(parts, scale, ct.param_id())
    }

    /// Product, relinearization and rescale: the output sits one level
    /// lower with scale `scale_a * scale_b / q_level`.
    pub fn mul(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext, HeError> {
        self.check_ct(a)?;
        self.check_ct(b)?;
        Self::check_linear(a)?;
        Self::check_linear(b)?;
        let level = rules::same_level(a.level(), b.level())?;
        rules::product(self.params(), "multiply", level, a.scale(), b.scale())?;
        if self.relin.is_none() {
            return Err(HeError::MissingRelinKey);
        }
        let tensor = self.multiply_no_relin(a, b)?;
        self.rescale(&self.relinearize(&tensor)?)
    }

    pub fn mul_plain(&self, ct: &Ciphertext, pt: &Plaintext) -> Result<Ciphertext, HeError> {
        self.check_ct(ct)?;
        self.check_pt(pt)?;
        Self::check_linear(ct)?;
        let level = rules::same_level(ct.level(), pt.level())?;
        rules::product(self.params(), "multiply_plain", level, ct.scale(), pt.scale())?;
        let ctx = &*self.ctx;
        let mut p = pt.poly().clone();
        p.forward_ntt(ctx);
        let parts = ct
            .parts()
            .iter()
            .map(|c| {
                let mut c = RnsPoly::clone(c);
                c.forward_ntt(ctx);
                let mut prod = c.pointwise(&p, ctx);
                prod.inverse_ntt(ctx);
                prod
            })
            .collect();
        let product = Ciphertext::from_parts(parts, ct.scale() * pt.scale(), ct.param_id())?;
        self.rescale(&product)
    }

    /// Drops primes down to `level` without touching the scale.
    pub fn mod_switch_to(&self, ct: &Ciphertext, level: usize) -> Result<Ciphertext, HeError> {
        self.check_ct(ct)?;
        rules::switch(ct.level(), level)?;
        if level == ct.level() {
            return Ok(ct.clone());
        }
        let parts = ct.parts().iter().map(|p| Arc::new(p.truncated(level))).collect();
        Ciphertext::from_shared_parts(parts, ct.scale(), ct.param_id())
    }
}
