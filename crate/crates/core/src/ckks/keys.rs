use std::fmt;

use rand::Rng;

use super::{CkksContext, HeError, HeParams, RnsPoly};
use crate::ring::{error_coeffs, ternary_coeffs};

/// Bit width of one relinearization digit.
pub const DECOMPOSITION_BITS: u32 = 30;

/// Ternary secret `s`.
#[derive(Clone, PartialEq, Eq)]
pub struct SecretKey {
    coeffs: Vec<i64>,
    param_id: u64,
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecretKey")
            .field("degree", &self.coeffs.len())
            .field("param_id", &self.param_id)
            .finish_non_exhaustive()
    }
}

impl SecretKey {
    pub fn from_coeffs(coeffs: Vec<i64>, param_id: u64) -> Result<Self, HeError> {
        if !coeffs.iter().all(|c| (-1..=1).contains(c)) {
            return Err(HeError::InvalidParams("secret key must be ternary".into()));
        }
        Ok(Self { coeffs, param_id })
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn param_id(&self) -> u64 {
        self.param_id
    }

    pub(crate) fn to_rns(&self, ctx: &CkksContext, level: usize) -> RnsPoly {
        RnsPoly::from_signed(ctx, &self.coeffs, level)
    }
}

/// `(b, a)` with `b = -a*s + e` at the top level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    b: RnsPoly,
    a: RnsPoly,
    param_id: u64,
}

impl PublicKey {
    pub fn from_parts(b: RnsPoly, a: RnsPoly, param_id: u64) -> Self {
        Self { b, a, param_id }
    }

    pub fn b(&self) -> &RnsPoly {
        &self.b
    }

    pub fn a(&self) -> &RnsPoly {
        &self.a
    }

    pub fn param_id(&self) -> u64 {
        self.param_id
    }
}

/// Key-switching material for `s^2`.
///
/// Entry `(j, k)` encrypts `2^(w*k) * s^2` placed on the residue of prime `q_j`
/// only, which is the RNS image of the CRT basis element for `q_j`. A product
/// term `c2` is split into its residues and each residue into `w`-bit digits,
/// so the same key serves every level by restriction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelinKey {
    decomposition_bits: u32,
    entries: Vec<Vec<[RnsPoly; 2]>>,
    param_id: u64,
}

impl RelinKey {
    pub fn from_entries(decomposition_bits: u32, entries: Vec<Vec<[RnsPoly; 2]>>, param_id: u64) -> Self {
        Self {
            decomposition_bits,
            entries,
            param_id,
        }
    }

    pub fn decomposition_bits(&self) -> u32 {
        self.decomposition_bits
    }

    pub fn entries(&self) -> &[Vec<[RnsPoly; 2]>] {
        &self.entries
    }

    pub fn param_id(&self) -> u64 {
        self.param_id
    }

    /// Checks that the key covers every prime of `ctx` with enough digits.
    pub(crate) fn validate(&self, ctx: &CkksContext) -> Result<(), HeError> {
        if self.param_id != ctx.param_id() {
            return Err(HeError::ParamMismatch);
        }
        let w = self.decomposition_bits;
        let shape_ok = self.entries.len() == ctx.max_level() + 1
            && self.entries.iter().enumerate().all(|(j, row)| {
                row.len() == digit_count(ctx.modulus(j).bits(), w)
                    && row.iter().flatten().all(|p| p.level() == ctx.max_level())
            });
        if !(1..=62).contains(&w) || !shape_ok {
            return Err(HeError::InvalidParams("malformed relinearization key".into()));
        }
        Ok(())
    }
}

pub(crate) fn digit_count(modulus_bits: u32, w: u32) -> usize {
    modulus_bits.div_ceil(w) as usize
}

/// Secret, public and relinearization keys for one parameter set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyBundle {
    pub secret_key: SecretKey,
    pub public_key: PublicKey,
    pub relin_key: RelinKey,
}

impl KeyBundle {
    pub fn param_id(&self) -> u64 {
        self.public_key.param_id
    }
}

fn rlwe_sample<R: Rng + ?Sized>(
    ctx: &CkksContext,
    s_ntt: &RnsPoly,
    rng: &mut R,
) -> (RnsPoly, RnsPoly) {
    let level = ctx.max_level();
    let a = RnsPoly::uniform(ctx, level, rng);
    let e = RnsPoly::from_signed(ctx, &error_coeffs(ctx.degree(), ctx.params().error_sigma(), rng), level);
    let mut a_ntt = a.clone();
    a_ntt.forward_ntt(ctx);
    let mut as_ = a_ntt.pointwise(s_ntt, ctx);
    as_.inverse_ntt(ctx);
    let mut b = e;
    b.sub_assign(&as_, ctx);
    (b, a)
}

pub fn keygen<R: Rng + ?Sized>(params: &HeParams, rng: &mut R) -> Result<KeyBundle, HeError> {
    let ctx = CkksContext::new(params)?;
    let n = ctx.degree();
    let top = ctx.max_level();
    let secret_key = SecretKey {
        coeffs: ternary_coeffs(n, rng),
        param_id: ctx.param_id(),
    };
    let mut s_ntt = secret_key.to_rns(&ctx, top);
    s_ntt.forward_ntt(&ctx);

    let (b, a) = rlwe_sample(&ctx, &s_ntt, rng);
    let public_key = PublicKey {
        b,
        a,
        param_id: ctx.param_id(),
    };

    let mut s2 = s_ntt.pointwise(&s_ntt, &ctx);
    s2.inverse_ntt(&ctx);
    let w = DECOMPOSITION_BITS;
    let mut entries = Vec::with_capacity(top + 1);
    for j in 0..=top {
        let m = *ctx.modulus(j);
        let digits = digit_count(m.bits(), w);
        let mut row = Vec::with_capacity(digits);
        for k in 0..digits {
            let (mut b, a) = rlwe_sample(&ctx, &s_ntt, rng);
            let factor = m.pow(2, w as u64 * k as u64);
            let factor_shoup = m.shoup(factor);
            let target = &s2.residue(j);
            let mut residues = b.residues().to_vec();
            for (x, &s) in residues[j].iter_mut().zip(target.iter()) {
                *x = m.add(*x, m.mul_shoup(s, factor, factor_shoup));
            }
            b = RnsPoly::from_residues(residues);
            row.push([b, a]);
        }
        entries.push(row);
    }
    let relin_key = RelinKey {
        decomposition_bits: w,
        entries,
        param_id: ctx.param_id(),
    };
    Ok(KeyBundle {
        secret_key,
        public_key,
        relin_key,
    })
}
