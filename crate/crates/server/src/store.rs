use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use edl_core::wire::{self, EncryptedRecord, Mode, RecordMetadata};
use serde::{Deserialize, Serialize};

use crate::jobs::{InferenceJob, JobStatus};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt entry {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("unknown {kind} `{id}`")]
    NotFound { kind: &'static str, id: String },
    #[error("job `{id}` cannot move from {from:?} to {to:?}")]
    BadTransition { id: String, from: JobStatus, to: JobStatus },
    #[error(transparent)]
    Wire(#[from] wire::WireError),
}

/// Index entry for a stored dataset; the record itself stays on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub dataset_id: String,
    pub received_at: DateTime<Utc>,
    pub sequence: u64,
    pub metadata: RecordMetadata,
    /// Lowest level among the record's ciphertexts.
    pub available_levels: usize,
}

#[derive(Default)]
struct Index {
    datasets: HashMap<String, DatasetEntry>,
    jobs: HashMap<String, InferenceJob>,
    next_sequence: u64,
}

/// Directory-backed store. Records and results are stored as transmission
/// frames, indexes as JSON sidecars; every file is written to a temporary
/// name and renamed into place.
///
/// ```text
/// <root>/datasets/<id>.edls   record frame
/// <root>/datasets/<id>.json   DatasetEntry
/// <root>/jobs/<id>.json       InferenceJob
/// <root>/results/<id>.edls    result record frame
/// ```
pub struct Store {
    root: PathBuf,
    index: RwLock<Index>,
    writes: Mutex<()>,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = path.parent().expect("store paths have a parent");
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(dir))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.as_file().sync_all().map_err(io(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StoreError> {
    let bytes = fs::read(path).map_err(io(path))?;
    serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            out.push(path);
        }
    }
    Ok(out)
}

impl Store {
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        for sub in ["datasets", "jobs", "results"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io(&dir))?;
        }
        let mut index = Index::default();
        for path in json_files(&root.join("datasets"))? {
            let entry: DatasetEntry = read_json(&path)?;
            index.next_sequence = index.next_sequence.max(entry.sequence + 1);
            index.datasets.insert(entry.dataset_id.clone(), entry);
        }
        for path in json_files(&root.join("jobs"))? {
            let job: InferenceJob = read_json(&path)?;
            index.next_sequence = index.next_sequence.max(job.sequence + 1);
            index.jobs.insert(job.job_id.clone(), job);
        }
        Ok(Self {
            root: root.to_path_buf(),
            index: RwLock::new(index),
            writes: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dataset_path(&self, id: &str, ext: &str) -> PathBuf {
        self.root.join("datasets").join(format!("{id}.{ext}"))
    }

    fn job_path(&self, id: &str) -> PathBuf {
        self.root.join("jobs").join(format!("{id}.json"))
    }

    fn result_path(&self, id: &str) -> PathBuf {
        self.root.join("results").join(format!("{id}.edls"))
    }

    fn next_sequence(&self) -> u64 {
        let mut index = self.index.write().expect("store index");
        let s = index.next_sequence;
        index.next_sequence += 1;
        s
    }

    /// Persists a transmission frame already decoded into `record`.
    pub fn put_dataset(&self, frame: &[u8], record: &EncryptedRecord) -> Result<DatasetEntry, StoreError> {
        let entry = DatasetEntry {
            dataset_id: uuid::Uuid::new_v4().to_string(),
            received_at: Utc::now(),
            sequence: self.next_sequence(),
            metadata: record.metadata(),
            available_levels: record.ciphertexts.iter().map(|c| c.level()).min().unwrap_or(0),
        };
        let _guard = self.writes.lock().expect("store writer");
        write_atomic(&self.dataset_path(&entry.dataset_id, "edls"), frame)?;
        write_atomic(
            &self.dataset_path(&entry.dataset_id, "json"),
            &serde_json::to_vec_pretty(&entry).expect("entry serializes"),
        )?;
        self.index
            .write()
            .expect("store index")
            .datasets
            .insert(entry.dataset_id.clone(), entry.clone());
        Ok(entry)
    }

    pub fn dataset(&self, id: &str) -> Option<DatasetEntry> {
        self.index.read().expect("store index").datasets.get(id).cloned()
    }

    /// Newest first.
    pub fn list_datasets(&self, owner: Option<&str>) -> Vec<DatasetEntry> {
        let index = self.index.read().expect("store index");
        let mut out: Vec<DatasetEntry> = index
            .datasets
            .values()
            .filter(|d| owner.is_none_or(|o| d.metadata.owner == o))
            .cloned()
            .collect();
        out.sort_by(|a, b| (b.received_at, b.sequence).cmp(&(a.received_at, a.sequence)));
        out
    }

    pub fn load_record(&self, id: &str) -> Result<EncryptedRecord, StoreError> {
        if self.dataset(id).is_none() {
            return Err(StoreError::NotFound {
                kind: "dataset",
                id: id.to_string(),
            });
        }
        let path = self.dataset_path(id, "edls");
        let bytes = fs::read(&path).map_err(io(&path))?;
        Ok(wire::deserialize_record(&bytes, Mode::Transmission)?)
    }

    pub fn create_job(&self, dataset_id: &str, model_id: &str) -> Result<InferenceJob, StoreError> {
        let now = Utc::now();
        let job = InferenceJob {
            job_id: uuid::Uuid::new_v4().to_string(),
            dataset_id: dataset_id.to_string(),
            model_id: model_id.to_string(),
            status: JobStatus::Queued,
            error: None,
            created_at: now,
            updated_at: now,
            sequence: self.next_sequence(),
        };
        self.save_job(&job)?;
        Ok(job)
    }

    fn save_job(&self, job: &InferenceJob) -> Result<(), StoreError> {
        let _guard = self.writes.lock().expect("store writer");
        write_atomic(
            &self.job_path(&job.job_id),
            &serde_json::to_vec_pretty(job).expect("job serializes"),
        )?;
        self.index
            .write()
            .expect("store index")
            .jobs
            .insert(job.job_id.clone(), job.clone());
        Ok(())
    }

    pub fn job(&self, id: &str) -> Option<InferenceJob> {
        self.index.read().expect("store index").jobs.get(id).cloned()
    }

    /// Moves a job forward. A `Done` transition must come with the result
    /// frame, which is written before the status flips.
    pub fn advance_job(
        &self,
        id: &str,
        to: JobStatus,
        error: Option<String>,
        result: Option<&[u8]>,
    ) -> Result<InferenceJob, StoreError> {
        let mut job = self.job(id).ok_or_else(|| StoreError::NotFound {
            kind: "job",
            id: id.to_string(),
        })?;
        if !job.status.can_move_to(to) || (to == JobStatus::Done) != result.is_some() {
            return Err(StoreError::BadTransition {
                id: id.to_string(),
                from: job.status,
                to,
            });
        }
        if let Some(bytes) = result {
            let _guard = self.writes.lock().expect("store writer");
            write_atomic(&self.result_path(id), bytes)?;
        }
        job.status = to;
        job.error = error;
        job.updated_at = Utc::now();
        self.save_job(&job)?;
        Ok(job)
    }

    pub fn result(&self, id: &str) -> Result<Option<Vec<u8>>, StoreError> {
        match self.job(id) {
            Some(job) if job.status == JobStatus::Done => {
                let path = self.result_path(id);
                Ok(Some(fs::read(&path).map_err(io(&path))?))
            }
            _ => Ok(None),
        }
    }

    /// Queued or running jobs, oldest first.
    pub fn unfinished_jobs(&self) -> Vec<String> {
        let index = self.index.read().expect("store index");
        let mut jobs: Vec<&InferenceJob> = index
            .jobs
            .values()
            .filter(|j| matches!(j.status, JobStatus::Queued | JobStatus::Running))
            .collect();
        jobs.sort_by_key(|j| j.sequence);
        jobs.into_iter().map(|j| j.job_id.clone()).collect()
    }
}
