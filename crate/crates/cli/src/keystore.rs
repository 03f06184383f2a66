//! Client-side key storage. Layout:
//!
//! ```text
//! <root>/<dataset_name>/keys.edls   key bundle frame (params + sk + pk + rlk)
//! ```
//!
//! Nothing under `<root>` is ever sent to the server.

use std::path::{Path, PathBuf};

use edl_core::ckks::{keygen, HeParams, KeyBundle};
use edl_core::wire::{deserialize_key_bundle, serialize_key_bundle};
use rand::Rng;

use crate::ClientError;

pub const KEY_FILE: &str = "keys.edls";

#[derive(Clone, Debug)]
pub struct KeyStore {
    root: PathBuf,
}

impl KeyStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, dataset: &str) -> Result<PathBuf, ClientError> {
        check_name(dataset)?;
        Ok(self.root.join(dataset).join(KEY_FILE))
    }

    pub fn contains(&self, dataset: &str) -> bool {
        self.path_for(dataset).map(|p| p.is_file()).unwrap_or(false)
    }

    /// Generates and stores a new bundle. Refuses to overwrite an existing one.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        dataset: &str,
        params: &HeParams,
        rng: &mut R,
    ) -> Result<KeyBundle, ClientError> {
        let path = self.path_for(dataset)?;
        if path.exists() {
            return Err(ClientError::KeysExist(dataset.to_string()));
        }
        let keys = keygen(params, rng)?;
        let bytes = serialize_key_bundle(&keys, params)?;
        let dir = path.parent().expect("key path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| ClientError::keystore(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ClientError::keystore(dir, e))?;
        std::io::Write::write_all(&mut tmp, &bytes).map_err(|e| ClientError::keystore(&path, e))?;
        tmp.persist(&path).map_err(|e| ClientError::keystore(&path, e.error))?;
        Ok(keys)
    }

    pub fn load(&self, dataset: &str) -> Result<(HeParams, KeyBundle), ClientError> {
        let path = self.path_for(dataset)?;
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(ClientError::NoKeys(dataset.to_string()));
            }
            Err(e) => return Err(ClientError::keystore(&path, e)),
        };
        Ok(deserialize_key_bundle(&bytes)?)
    }

    /// Existing keys for `dataset`, or fresh ones. Existing keys must match
    /// `params`.
    pub fn load_or_generate<R: Rng + ?Sized>(
        &self,
        dataset: &str,
        params: &HeParams,
        rng: &mut R,
    ) -> Result<KeyBundle, ClientError> {
        if !self.contains(dataset) {
            return self.generate(dataset, params, rng);
        }
        let (stored, keys) = self.load(dataset)?;
        if stored.param_id() != params.param_id() {
            return Err(ClientError::Usage(format!(
                "keys for `{dataset}` were made for different parameters"
            )));
        }
        Ok(keys)
    }
}

fn check_name(dataset: &str) -> Result<(), ClientError> {
    let ok = !dataset.is_empty()
        && dataset != "."
        && dataset != ".."
        && dataset.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !ok {
        return Err(ClientError::Usage(format!(
            "dataset name `{dataset}` must be non-empty and use only letters, digits, '-', '_' or '.'"
        )));
    }
    Ok(())
}
