//! The `EDLS` container: one tagged-section frame format for parameters,
//! keys, ciphertexts and dataset records.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "EDLS"
//! 4       2     version (u16 LE)
//! 6       2     section count n (u16 LE)
//! 8       4     payload length p (u32 LE)
//! 12      10*n  section table: tag u16, offset u32, length u32
//!               (offsets relative to the payload start)
//! 12+10n  p     payload
//! end-4   4     CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! All integers are little-endian. Polynomials are written residue by
//! residue, one `u64` per coefficient.

mod codec;
mod frame;
mod record;

pub use codec::{
    deserialize_ciphertext, deserialize_key_bundle, deserialize_public_key, deserialize_relin_key,
    deserialize_values, read_params, serialize_ciphertext, serialize_key_bundle, serialize_public_key,
    serialize_relin_key, serialize_values,
};
pub use frame::{Frame, Section, Tag, HEADER_LEN, MAGIC, VERSION};
pub use record::{deserialize_record, serialize_record, EncryptedRecord, Mode, RecordMetadata};

use crate::ckks::HeError;

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("not an EDLS frame")]
    BadMagic,
    #[error("unsupported frame version {0}")]
    UnsupportedVersion(u16),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed section: {0}")]
    BadSection(String),
    #[error("missing {0} section")]
    MissingSection(&'static str),
    #[error("parameter id {found:#018x} does not match {expected:#018x}")]
    ParamMismatch { expected: u64, found: u64 },
    #[error("policy violation: transmission frames must not carry a secret key")]
    SecretKeyPresent,
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    He(#[from] HeError),
}
