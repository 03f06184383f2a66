//! Exact arithmetic in the negacyclic ring `Z_q[X]/(X^N + 1)`.
//!
//! Everything here works on word-sized primes (< 2^62) so that sums of two
//! residues never overflow a `u64` and products fit a `u128`.

mod modulus;
mod ntt;
mod poly;
mod primes;
mod sampling;

pub use modulus::Modulus;
pub use ntt::{ntt_forward, ntt_inverse, NttTable};
pub use poly::RingPoly;
pub use primes::{is_prime, ntt_primes_above, ntt_primes_below};
pub use sampling::{
    error_coeffs, sample_error, sample_ternary, sample_uniform, ternary_coeffs, uniform_coeffs,
    ERROR_TAIL_CUT,
};

use thiserror::Error;

/// Largest modulus bit width the ring layer accepts.
pub const MAX_MODULUS_BITS: u32 = 62;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RingError {
    #[error("parameter mismatch: {0}")]
    ParameterMismatch(String),
    #[error("unsupported modulus {modulus}: {reason}")]
    UnsupportedModulus { modulus: u64, reason: String },
    #[error("invalid ring degree {0}: must be a power of two >= 2")]
    InvalidDegree(usize),
    #[error("coefficient {value} at index {index} is not reduced modulo {modulus}")]
    UnreducedCoefficient { index: usize, value: u64, modulus: u64 },
}

pub(crate) fn check_degree(n: usize) -> Result<(), RingError> {
    if n >= 2 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(RingError::InvalidDegree(n))
    }
}
