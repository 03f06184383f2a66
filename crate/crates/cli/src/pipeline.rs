use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Utc};
use edl_core::ckks::{decode, encode, CkksContext, Decryptor, Encryptor, HeParams, KeyBundle};
use edl_core::nn::{pack_timestep, SENTINEL};
use edl_core::wire::{deserialize_record, EncryptedRecord, Mode};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map};

use crate::keystore::KeyStore;
use crate::wrangle::Wrangled;
use crate::ClientError;

/// Largest sentinel error accepted after decryption.
pub const SENTINEL_TOLERANCE: f64 = 1e-2;

static LAST_STAMP: AtomicI64 = AtomicI64::new(i64::MIN);

/// Wall clock, nudged forward so that stamps from this process strictly
/// increase.
fn monotone_now() -> DateTime<Utc> {
    let now = Utc::now().timestamp_micros();
    let mut prev = LAST_STAMP.load(Ordering::Relaxed);
    loop {
        let next = now.max(prev.saturating_add(1));
        match LAST_STAMP.compare_exchange(prev, next, Ordering::Relaxed, Ordering::Relaxed) {
            Ok(_) => return DateTime::from_timestamp_micros(next).expect("timestamp in range"),
            Err(seen) => prev = seen,
        }
    }
}

/// Encrypts every timestep of every window at the top level, using the
/// dataset's keys from `keystore` (made on first use). The record carries
/// public and relinearization keys but never the secret key.
pub fn encrypt_dataset<R: Rng + ?Sized>(
    wrangled: &Wrangled,
    dataset_name: &str,
    owner: &str,
    params: &HeParams,
    keystore: &KeyStore,
    rng: &mut R,
) -> Result<EncryptedRecord, ClientError> {
    let keys = keystore.load_or_generate(dataset_name, params, rng)?;
    encrypt_with(wrangled, dataset_name, owner, params, &keys, rng)
}

pub fn encrypt_with<R: Rng + ?Sized>(
    wrangled: &Wrangled,
    dataset_name: &str,
    owner: &str,
    params: &HeParams,
    keys: &KeyBundle,
    rng: &mut R,
) -> Result<EncryptedRecord, ClientError> {
    let slots = params.slot_count();
    if wrangled.feature_count() >= slots {
        return Err(ClientError::Usage(format!(
            "{} features do not fit in {slots} slots",
            wrangled.feature_count()
        )));
    }
    let ctx = CkksContext::new(params)?;
    let encryptor = Encryptor::new(ctx.clone(), &keys.public_key)?;
    let top = params.max_level();
    let mut ciphertexts = Vec::with_capacity(wrangled.windows.len() * wrangled.window_length);
    for window in &wrangled.windows {
        for row in &window.rows {
            let pt = encode(&ctx, &pack_timestep(row, slots), params.scale(), top)?;
            ciphertexts.push(encryptor.encrypt(&pt, rng)?);
        }
    }
    let mut annotations = Map::new();
    annotations.insert("features".into(), json!(wrangled.feature_names));
    annotations.insert("target".into(), json!(wrangled.target));
    Ok(EncryptedRecord {
        dataset_name: dataset_name.to_string(),
        owner: owner.to_string(),
        submitted_at: monotone_now(),
        window_length: wrangled.window_length,
        feature_count: wrangled.feature_count(),
        annotations,
        params: params.clone(),
        public_key: Some(keys.public_key.clone()),
        relin_key: Some(keys.relin_key.clone()),
        ciphertexts,
        secret_key: None,
    })
}

/// Decrypted slot vectors of every ciphertext in `record`.
pub fn decrypt_slots(record: &EncryptedRecord, keys: &KeyBundle) -> Result<Vec<Vec<f64>>, ClientError> {
    let ctx = CkksContext::new(&record.params)?;
    let decryptor = Decryptor::new(ctx.clone(), &keys.secret_key)?;
    record
        .ciphertexts
        .iter()
        .map(|ct| Ok(decode(&ctx, &decryptor.decrypt(ct)?)?))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub window: usize,
    /// Sum of the feature slots, in normalised target units.
    pub value: f64,
    pub sentinel: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub dataset_name: String,
    pub owner: String,
    pub job_id: Option<String>,
    pub model_id: Option<String>,
    pub source_dataset_id: Option<String>,
    pub expected_sentinel: f64,
    pub result_level: usize,
    pub predictions: Vec<Prediction>,
}

/// Decrypts a result frame with the keys the keystore holds for its dataset.
pub fn decrypt_result(bytes: &[u8], keystore: &KeyStore) -> Result<PredictionReport, ClientError> {
    let record = deserialize_record(bytes, Mode::Transmission)?;
    let (_, keys) = keystore.load(&record.dataset_name)?;
    report(&record, &keys)
}

pub fn decrypt_result_with(bytes: &[u8], keys: &KeyBundle) -> Result<PredictionReport, ClientError> {
    let record = deserialize_record(bytes, Mode::Transmission)?;
    report(&record, keys)
}

fn report(record: &EncryptedRecord, keys: &KeyBundle) -> Result<PredictionReport, ClientError> {
    let text = |k: &str| record.annotations.get(k).and_then(|v| v.as_str()).map(str::to_string);
    let expected = record
        .annotations
        .get("expected_sentinel")
        .and_then(|v| v.as_f64())
        .unwrap_or(SENTINEL);
    let features = record.feature_count;
    let last = record.params.slot_count() - 1;
    let mut predictions = Vec::with_capacity(record.ciphertexts.len());
    for (window, slots) in decrypt_slots(record, keys)?.into_iter().enumerate() {
        let sentinel = slots[last];
        if !((sentinel - expected).abs() <= SENTINEL_TOLERANCE) {
            return Err(ClientError::SentinelMismatch {
                window,
                expected,
                found: sentinel,
            });
        }
        predictions.push(Prediction {
            window,
            value: slots[..features].iter().sum(),
            sentinel,
        });
    }
    Ok(PredictionReport {
        dataset_name: record.dataset_name.clone(),
        owner: record.owner.clone(),
        job_id: text("job_id"),
        model_id: text("model_id"),
        source_dataset_id: text("source_dataset_id"),
        expected_sentinel: expected,
        result_level: record.ciphertexts.iter().map(|c| c.level()).max().unwrap_or(0),
        predictions,
    })
}
