use std::fs;
use std::path::{Path, PathBuf};

use edl_core::nn::{ActivationRegistry, ComputeGraph, ModelFile, NnError};
use edl_core::registry::{Registry, RegistryError};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read model directory {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model file {path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: NnError,
    },
    #[error(transparent)]
    Duplicate(#[from] RegistryError),
}

#[derive(Clone, Debug)]
pub struct ModelEntry {
    pub id: String,
    pub graph: ComputeGraph,
    pub depth: usize,
}

/// Models addressable by id.
pub struct ModelRegistry {
    inner: Registry<ModelEntry>,
    activations: ActivationRegistry,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self {
            inner: Registry::new("model"),
            activations: ActivationRegistry::default(),
        }
    }
}

impl ModelRegistry {
    /// Loads every `*.json` file in `dir`, in name order.
    pub fn load_dir(dir: &Path) -> Result<Self, ModelError> {
        let err = |source| ModelError::Io {
            path: dir.to_path_buf(),
            source,
        };
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(err)?
            .map(|e| e.map(|e| e.path()))
            .collect::<Result<_, _>>()
            .map_err(err)?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        let mut registry = Self::default();
        for path in paths {
            registry.load_file(&path)?;
        }
        Ok(registry)
    }

    pub fn load_file(&mut self, path: &Path) -> Result<&ModelEntry, ModelError> {
        let malformed = |source| ModelError::Malformed {
            path: path.to_path_buf(),
            source,
        };
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let model = ModelFile::from_json(&text).map_err(malformed)?;
        self.insert(&model).map_err(|e| match e {
            ModelError::Malformed { source, .. } => malformed(source),
            other => other,
        })
    }

    pub fn insert(&mut self, model: &ModelFile) -> Result<&ModelEntry, ModelError> {
        let malformed = |source| ModelError::Malformed {
            path: PathBuf::from(&model.id),
            source,
        };
        let graph = model.to_graph(&self.activations).map_err(malformed)?;
        let depth = graph.depth_budget().map_err(malformed)?;
        self.inner.register(
            model.id.clone(),
            ModelEntry {
                id: model.id.clone(),
                graph,
                depth,
            },
        )?;
        Ok(self.inner.get(&model.id)?)
    }

    pub fn get(&self, id: &str) -> Option<&ModelEntry> {
        self.inner.get(id).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ModelEntry> {
        self.inner.iter().map(|(_, m)| m)
    }
}
