use super::{RingError, MAX_MODULUS_BITS};

/// A word-sized modulus with a precomputed Barrett constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Modulus {
    value: u64,
    // floor((2^128 - 1) / q)
    ratio: u128,
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self, RingError> {
        if value < 2 {
            return Err(RingError::UnsupportedModulus {
                modulus: value,
                reason: "modulus must be at least 2".into(),
            });
        }
        if 64 - value.leading_zeros() > MAX_MODULUS_BITS {
            return Err(RingError::UnsupportedModulus {
                modulus: value,
                reason: format!("modulus wider than {MAX_MODULUS_BITS} bits"),
            });
        }
        Ok(Self {
            value,
            ratio: u128::MAX / value as u128,
        })
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn bits(&self) -> u32 {
        64 - self.value.leading_zeros()
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        s - (self.value & ((s >= self.value) as u64).wrapping_neg())
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        let d = a.wrapping_sub(b);
        d.wrapping_add(self.value & ((a < b) as u64).wrapping_neg())
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.value - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce_u128(a as u128 * b as u128)
    }

    /// Barrett reduction of a value below `q^2`.
    #[inline]
    pub fn reduce_u128(&self, x: u128) -> u64 {
        let q = self.value as u128;
        let (xl, xh) = (x as u64 as u128, x >> 64);
        let (rl, rh) = (self.ratio as u64 as u128, self.ratio >> 64);
        let lo_lo = (xl * rl) >> 64;
        let hi_lo = xh * rl;
        let lo_hi = xl * rh;
        let mid = lo_lo + (hi_lo as u64 as u128) + (lo_hi as u64 as u128);
        let quot = xh * rh + (hi_lo >> 64) + (lo_hi >> 64) + (mid >> 64);
        let mut r = x.wrapping_sub(quot.wrapping_mul(q));
        while r >= q {
            r -= q;
        }
        r as u64
    }

    #[inline]
    pub fn reduce(&self, x: u64) -> u64 {
        x % self.value
    }

    /// Maps a signed integer to its residue in `[0, q)`.
    #[inline]
    pub fn reduce_i64(&self, x: i64) -> u64 {
        let r = x.rem_euclid(self.value as i64);
        r as u64
    }

    /// Maps a signed 128-bit integer to its residue in `[0, q)`.
    pub fn reduce_i128(&self, x: i128) -> u64 {
        x.rem_euclid(self.value as i128) as u64
    }

    /// Centered representative in `(-q/2, q/2]`.
    #[inline]
    pub fn center(&self, a: u64) -> i64 {
        if a > self.value / 2 {
            a as i64 - self.value as i64
        } else {
            a as i64
        }
    }

    pub fn pow(&self, base: u64, mut exp: u64) -> u64 {
        let mut result = 1 % self.value;
        let mut b = base % self.value;
        while exp > 0 {
            if exp & 1 == 1 {
                result = self.mul(result, b);
            }
            b = self.mul(b, b);
            exp >>= 1;
        }
        result
    }

    /// Multiplicative inverse, if `a` is a unit.
    pub fn inv(&self, a: u64) -> Option<u64> {
        let (mut old_r, mut r) = (a as i128 % self.value as i128, self.value as i128);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        if old_r != 1 {
            return None;
        }
        Some(old_s.rem_euclid(self.value as i128) as u64)
    }

    /// Shoup precomputation for repeated multiplication by the constant `w`.
    #[inline]
    pub fn shoup(&self, w: u64) -> u64 {
        (((w as u128) << 64) / self.value as u128) as u64
    }

    /// `a * w mod q` using the Shoup constant of `w`.
    #[inline]
    pub fn mul_shoup(&self, a: u64, w: u64, w_shoup: u64) -> u64 {
        let qhat = ((a as u128 * w_shoup as u128) >> 64) as u64;
        let r = a.wrapping_mul(w).wrapping_sub(qhat.wrapping_mul(self.value));
        r - (self.value & ((r >= self.value) as u64).wrapping_neg())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_degenerate_moduli() {
        assert!(Modulus::new(0).is_err());
        assert!(Modulus::new(1).is_err());
        assert!(Modulus::new(1 << 62).is_err());
        assert!(Modulus::new((1 << 62) - 57).is_ok());
    }

    #[test]
    fn inverse_and_center() {
        let m = Modulus::new(17).unwrap();
        assert_eq!(m.inv(3), Some(6));
        assert_eq!(m.inv(0), None);
        assert_eq!(m.center(16), -1);
        assert_eq!(m.center(8), 8);
        assert_eq!(m.reduce_i64(-5), 12);
    }

    proptest! {
        #[test]
        fn barrett_matches_u128_remainder(q in 2u64..(1u64 << 62), a: u64, b: u64) {
            let m = Modulus::new(q).unwrap();
            let (a, b) = (a % q, b % q);
            prop_assert_eq!(m.mul(a, b), ((a as u128 * b as u128) % q as u128) as u64);
        }

        #[test]
        fn shoup_matches_u128_remainder(q in 2u64..(1u64 << 62), a: u64, w: u64) {
            let m = Modulus::new(q).unwrap();
            let (a, w) = (a % q, w % q);
            prop_assert_eq!(m.mul_shoup(a, w, m.shoup(w)), ((a as u128 * w as u128) % q as u128) as u64);
        }
    }
}
