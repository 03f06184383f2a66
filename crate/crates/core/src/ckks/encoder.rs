use num_complex::Complex64;

use super::{CkksContext, HeError, Plaintext, RnsPoly};

/// Largest coefficient magnitude a plaintext may carry at `level`: it must be
/// representable as an `i64` and stay below half the level modulus.
fn coefficient_bound(ctx: &CkksContext, level: usize) -> f64 {
    let half_modulus = 2f64.powf(ctx.params().log2_modulus(level) - 1.0);
    half_modulus.min(2f64.powi(62))
}

/// Rejects slot vectors whose scaled magnitude cannot be encoded at `level`.
/// Shared by every backend so that they raise the same error.
pub fn check_encoding_bound(
    ctx: &CkksContext,
    values: &[f64],
    scale: f64,
    level: usize,
) -> Result<(), HeError> {
    let slots = ctx.params().slot_count();
    if values.len() > slots {
        return Err(HeError::TooManySlots {
            len: values.len(),
            slots,
        });
    }
    let bound = coefficient_bound(ctx, level);
    let max = values.iter().fold(0f64, |m, v| m.max(v.abs()));
    let magnitude = max * scale;
    if !magnitude.is_finite() || magnitude >= bound {
        return Err(HeError::EncodingOverflow { magnitude, bound });
    }
    Ok(())
}

fn bit_reverse_permute(vals: &mut [Complex64]) {
    let n = vals.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            vals.swap(i, j);
        }
    }
}

/// Evaluates the polynomial whose packed coefficients are `vals` at the slot
/// roots `zeta^(5^j)`.
fn fft_special(ctx: &CkksContext, vals: &mut [Complex64]) {
    let n = vals.len();
    let m = 2 * ctx.degree();
    bit_reverse_permute(vals);
    let mut len = 2;
    while len <= n {
        let (lenh, lenq) = (len >> 1, len << 2);
        for i in (0..n).step_by(len) {
            for j in 0..lenh {
                let idx = (ctx.rot_group[j] % lenq) * (m / lenq);
                let u = vals[i + j];
                let v = vals[i + j + lenh] * ctx.ksi_pows[idx];
                vals[i + j] = u + v;
                vals[i + j + lenh] = u - v;
            }
        }
        len <<= 1;
    }
}

fn fft_special_inv(ctx: &CkksContext, vals: &mut [Complex64]) {
    let n = vals.len();
    let m = 2 * ctx.degree();
    let mut len = n;
    while len >= 2 {
        let (lenh, lenq) = (len >> 1, len << 2);
        for i in (0..n).step_by(len) {
            for j in 0..lenh {
                let idx = (lenq - ctx.rot_group[j] % lenq) * (m / lenq);
                let u = vals[i + j] + vals[i + j + lenh];
                let v = (vals[i + j] - vals[i + j + lenh]) * ctx.ksi_pows[idx];
                vals[i + j] = u;
                vals[i + j + lenh] = v;
            }
        }
        len >>= 1;
    }
    bit_reverse_permute(vals);
    let inv = 1.0 / n as f64;
    for v in vals.iter_mut() {
        *v *= inv;
    }
}

/// Encodes up to `N/2` real values (zero-padded) as a plaintext at `level`
/// with scale `scale`.
pub fn encode(
    ctx: &CkksContext,
    values: &[f64],
    scale: f64,
    level: usize,
) -> Result<Plaintext, HeError> {
    ctx.check_level(level)?;
    check_encoding_bound(ctx, values, scale, level)?;
    let slots = ctx.params().slot_count();
    let mut vals = vec![Complex64::new(0.0, 0.0); slots];
    for (v, &x) in vals.iter_mut().zip(values) {
        v.re = x;
    }
    fft_special_inv(ctx, &mut vals);
    let bound = coefficient_bound(ctx, level);
    let mut coeffs = vec![0i64; ctx.degree()];
    for (i, v) in vals.iter().enumerate() {
        for (k, part) in [(i, v.re), (i + slots, v.im)] {
            let c = (part * scale).round();
            if !(c.abs() < bound) {
                return Err(HeError::EncodingOverflow {
                    magnitude: c.abs(),
                    bound,
                });
            }
            coeffs[k] = c as i64;
        }
    }
    Ok(Plaintext::new(
        RnsPoly::from_signed(ctx, &coeffs, level),
        scale,
        ctx.param_id(),
    ))
}

/// Real parts of the `N/2` slots of `pt`.
pub fn decode(ctx: &CkksContext, pt: &Plaintext) -> Result<Vec<f64>, HeError> {
    if pt.param_id() != ctx.param_id() {
        return Err(HeError::ParamMismatch);
    }
    let slots = ctx.params().slot_count();
    let coeffs = pt.poly().centered_base(ctx);
    let inv_scale = 1.0 / pt.scale();
    let mut vals: Vec<Complex64> = (0..slots)
        .map(|i| {
            Complex64::new(
                coeffs[i] as f64 * inv_scale,
                coeffs[i + slots] as f64 * inv_scale,
            )
        })
        .collect();
    fft_special(ctx, &mut vals);
    Ok(vals.into_iter().map(|v| v.re).collect())
}
