use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::codec::{
    ciphertext_body, frame_params, public_key_body, read_ciphertext_body, read_public_key_body, read_relin_key_body,
    read_secret_key_section, relin_key_body, secret_key_section,
};
use super::frame::{Frame, Tag};
use super::WireError;
use crate::ckks::{Ciphertext, CkksContext, HeParams, PublicKey, RelinKey, SecretKey};

/// `Local` frames may carry the secret key; `Transmission` frames never do.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Local,
    Transmission,
}

/// The JSON metadata section of a record frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMetadata {
    pub dataset_name: String,
    pub owner: String,
    pub submitted_at: DateTime<Utc>,
    pub window_length: usize,
    pub feature_count: usize,
    pub ciphertext_count: usize,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub annotations: Map<String, Value>,
}

/// A named, owned, timestamped batch of ciphertexts with the key material
/// needed to compute on them. Ciphertexts are grouped into consecutive
/// windows of `window_length` timesteps.
#[derive(Clone, Debug, PartialEq)]
pub struct EncryptedRecord {
    pub dataset_name: String,
    pub owner: String,
    pub submitted_at: DateTime<Utc>,
    pub window_length: usize,
    pub feature_count: usize,
    pub annotations: Map<String, Value>,
    pub params: HeParams,
    pub public_key: Option<PublicKey>,
    pub relin_key: Option<RelinKey>,
    pub ciphertexts: Vec<Ciphertext>,
    pub secret_key: Option<SecretKey>,
}

impl EncryptedRecord {
    pub fn metadata(&self) -> RecordMetadata {
        RecordMetadata {
            dataset_name: self.dataset_name.clone(),
            owner: self.owner.clone(),
            submitted_at: self.submitted_at,
            window_length: self.window_length,
            feature_count: self.feature_count,
            ciphertext_count: self.ciphertexts.len(),
            annotations: self.annotations.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), WireError> {
        let bad = |m: String| Err(WireError::InvalidRecord(m));
        if self.dataset_name.is_empty() {
            return bad("empty dataset name".into());
        }
        if self.ciphertexts.is_empty() {
            return bad("no ciphertexts".into());
        }
        if self.window_length == 0 || self.ciphertexts.len() % self.window_length != 0 {
            return bad(format!(
                "{} ciphertexts do not form windows of {}",
                self.ciphertexts.len(),
                self.window_length
            ));
        }
        let id = self.params.param_id();
        let ids = self
            .ciphertexts
            .iter()
            .map(Ciphertext::param_id)
            .chain(self.public_key.as_ref().map(PublicKey::param_id))
            .chain(self.relin_key.as_ref().map(RelinKey::param_id))
            .chain(self.secret_key.as_ref().map(SecretKey::param_id));
        for found in ids {
            if found != id {
                return Err(WireError::ParamMismatch { expected: id, found });
            }
        }
        Ok(())
    }

    pub fn windows(&self) -> impl Iterator<Item = &[Ciphertext]> {
        self.ciphertexts.chunks(self.window_length.max(1))
    }

    pub fn window_count(&self) -> usize {
        self.ciphertexts.len() / self.window_length.max(1)
    }
}

/// In transmission mode the secret key is left out.
pub fn serialize_record(record: &EncryptedRecord, mode: Mode) -> Result<Vec<u8>, WireError> {
    record.validate()?;
    let mut f = Frame::new();
    f.push(Tag::Params, record.params.descriptor_bytes());
    let meta = serde_json::to_vec(&record.metadata()).expect("metadata serializes");
    f.push(Tag::Metadata, meta);
    if let Some(pk) = &record.public_key {
        f.push(Tag::PublicKey, public_key_body(pk));
    }
    if let Some(rk) = &record.relin_key {
        f.push(Tag::RelinKey, relin_key_body(rk));
    }
    for ct in &record.ciphertexts {
        f.push(Tag::Ciphertext, ciphertext_body(ct));
    }
    if let (Mode::Local, Some(sk)) = (mode, &record.secret_key) {
        f.push(Tag::SecretKey, secret_key_section(sk));
    }
    Ok(f.encode())
}

/// In transmission mode a secret-key section is a policy error.
pub fn deserialize_record(bytes: &[u8], mode: Mode) -> Result<EncryptedRecord, WireError> {
    let frame = Frame::decode(bytes)?;
    if mode == Mode::Transmission && frame.has(Tag::SecretKey) {
        return Err(WireError::SecretKeyPresent);
    }
    let params = frame_params(&frame)?;
    let meta: RecordMetadata = serde_json::from_slice(frame.one(Tag::Metadata, "metadata")?)
        .map_err(|e| WireError::BadSection(format!("metadata: {e}")))?;
    let ctx = CkksContext::new(&params)?;
    let optional = |tag, what| -> Result<Option<&[u8]>, WireError> {
        if frame.has(tag) {
            frame.one(tag, what).map(Some)
        } else {
            Ok(None)
        }
    };
    let public_key = optional(Tag::PublicKey, "public key")?
        .map(|b| read_public_key_body(b, &ctx))
        .transpose()?;
    let relin_key = optional(Tag::RelinKey, "relinearization key")?
        .map(|b| read_relin_key_body(b, &ctx))
        .transpose()?;
    let secret_key = optional(Tag::SecretKey, "secret key")?
        .map(|b| read_secret_key_section(b, &ctx))
        .transpose()?;
    let ciphertexts = frame
        .all(Tag::Ciphertext)
        .map(|b| read_ciphertext_body(b, &ctx))
        .collect::<Result<Vec<_>, _>>()?;
    if ciphertexts.len() != meta.ciphertext_count {
        return Err(WireError::InvalidRecord(format!(
            "metadata announces {} ciphertexts, frame holds {}",
            meta.ciphertext_count,
            ciphertexts.len()
        )));
    }
    let record = EncryptedRecord {
        dataset_name: meta.dataset_name,
        owner: meta.owner,
        submitted_at: meta.submitted_at,
        window_length: meta.window_length,
        feature_count: meta.feature_count,
        annotations: meta.annotations,
        params,
        public_key,
        relin_key,
        ciphertexts,
        secret_key,
    };
    record.validate()?;
    Ok(record)
}
