//! Leveled CKKS over an RNS modulus chain.
//!
//! Ciphertexts and plaintexts live in coefficient form; products go through
//! the per-prime NTT tables held by [`CkksContext`]. There is no
//! bootstrapping: every multiplication rescales and consumes one level, and a
//! level-0 ciphertext can no longer be multiplied.

mod cipher;
mod context;
mod encoder;
mod eval;
mod keys;
mod params;
mod rns;

pub use cipher::{decrypt, encrypt, Ciphertext, Decryptor, Encryptor, Plaintext};
pub use context::CkksContext;
pub use encoder::{check_encoding_bound, decode, encode};
pub use eval::{rules, Evaluator};
pub use keys::{keygen, KeyBundle, PublicKey, RelinKey, SecretKey, DECOMPOSITION_BITS};
pub use params::{HeParams, SecurityProfile};
pub use rns::RnsPoly;

use thiserror::Error;

use crate::ring::RingError;

/// Relative tolerance under which two scales are considered equal.
pub const SCALE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter mismatch: operands were created under different parameters")]
    ParamMismatch,
    #[error("level mismatch ({left} vs {right}); align levels first")]
    LevelMismatch { left: usize, right: usize },
    #[error("scale mismatch ({left} vs {right})")]
    ScaleMismatch { left: f64, right: f64 },
    #[error("out of levels: {op} needs level >= 1, operand is at level 0")]
    OutOfLevels { op: &'static str },
    #[error("invalid modulus switch from level {from} to level {to}")]
    InvalidSwitch { from: usize, to: usize },
    #[error("ciphertext has {0} parts; relinearize before this operation")]
    NeedsRelinearization(usize),
    #[error("relinearization key required for ciphertext multiplication")]
    MissingRelinKey,
    #[error("encoding overflow: scaled magnitude {magnitude:e} exceeds bound {bound:e}")]
    EncodingOverflow { magnitude: f64, bound: f64 },
    #[error("scale overflow: product scale 2^{log2_scale:.1} does not fit level {level} modulus")]
    ScaleOverflow { log2_scale: f64, level: usize },
    #[error("{len} values do not fit {slots} slots")]
    TooManySlots { len: usize, slots: usize },
    #[error("operand kind not supported by the {backend} backend")]
    BackendMismatch { backend: &'static str },
    #[error(transparent)]
    Ring(#[from] RingError),
}

pub(crate) fn scales_match(a: f64, b: f64) -> bool {
    (a - b).abs() <= SCALE_TOLERANCE * a.abs().max(b.abs())
}
