//! The data-source side: turns raw CSV into encrypted windows, keeps the keys,
//! talks to the inference service and decrypts what comes back.

pub mod bench;
pub mod client;
pub mod keystore;
pub mod pipeline;
pub mod synth;
pub mod wrangle;

pub use client::{ApiClient, ClientOptions};
pub use keystore::KeyStore;
pub use pipeline::{decrypt_result, decrypt_result_with, encrypt_dataset, Prediction, PredictionReport};
pub use wrangle::{wrangle, WrangleSpec, Wrangled};

use std::path::{Path, PathBuf};

use edl_core::ckks::HeError;
use edl_core::nn::NnError;
use edl_core::wire::WireError;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Wrangle(#[from] wrangle::WrangleError),
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("cannot decrypt: no keys for dataset `{0}` in the keystore")]
    NoKeys(String),
    #[error("keys for dataset `{0}` already exist")]
    KeysExist(String),
    #[error("keystore {path}: {source}")]
    Keystore { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("server returned {status}: {body}")]
    Http { status: u16, body: String },
    #[error("request failed: {0}")]
    Transport(String),
    #[error("job {job_id} failed: {error}")]
    JobFailed { job_id: String, error: String },
    #[error("timed out waiting for job {0}")]
    Timeout(String),
    #[error("window {window}: sentinel slot decrypted to {found}, expected {expected}; wrong key or corrupted result")]
    SentinelMismatch { window: usize, expected: f64, found: f64 },
    #[error("{0}")]
    Usage(String),
}

impl ClientError {
    pub(crate) fn keystore(path: &Path, source: std::io::Error) -> Self {
        ClientError::Keystore {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ClientError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, ClientError> {
    std::fs::read(path).map_err(|e| ClientError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ClientError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ClientError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| ClientError::io(path, e))
}
