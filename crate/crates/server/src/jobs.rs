use std::sync::Arc;

use chrono::{DateTime, Utc};
use edl_core::backend::{Backend, CkksBackend, Tensor};
use edl_core::wire::{serialize_record, EncryptedRecord, Mode};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::{mpsc, Mutex};

use crate::models::ModelRegistry;
use crate::store::Store;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Queued,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    /// Forward moves only; staying put is allowed so that a job resumed after
    /// a restart can be marked running again.
    pub fn can_move_to(self, to: JobStatus) -> bool {
        use JobStatus::*;
        matches!(
            (self, to),
            (Queued, Running) | (Running, Running) | (Queued | Running, Done | Failed)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceJob {
    pub job_id: String,
    pub dataset_id: String,
    pub model_id: String,
    pub status: JobStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    pub sequence: u64,
}

#[derive(Clone)]
pub struct JobQueue {
    tx: mpsc::Sender<String>,
}

#[derive(Debug, thiserror::Error)]
#[error("inference queue is full")]
pub struct QueueFull;

impl JobQueue {
    pub fn try_enqueue(&self, job_id: String) -> Result<(), QueueFull> {
        self.tx.try_send(job_id).map_err(|_| QueueFull)
    }

    /// Waits for room; used when re-queuing jobs at startup.
    pub async fn resume(&self, job_id: String) {
        let _ = self.tx.send(job_id).await;
    }
}

pub fn start_workers(store: Arc<Store>, models: Arc<ModelRegistry>, workers: usize, capacity: usize) -> JobQueue {
    let (tx, rx) = mpsc::channel::<String>(capacity.max(1));
    let rx = Arc::new(Mutex::new(rx));
    for _ in 0..workers.max(1) {
        let (rx, store, models) = (rx.clone(), store.clone(), models.clone());
        tokio::spawn(async move {
            loop {
                let Some(job_id) = rx.lock().await.recv().await else {
                    break;
                };
                let (store, models) = (store.clone(), models.clone());
                let id = job_id.clone();
                let outcome = tokio::task::spawn_blocking(move || run_job(&store, &models, &id)).await;
                if let Err(e) = outcome {
                    tracing::error!(job_id = %job_id, error = %e, "worker panicked");
                }
            }
        });
    }
    JobQueue { tx }
}

fn run_job(store: &Store, models: &ModelRegistry, job_id: &str) {
    let started = std::time::Instant::now();
    if let Err(e) = store.advance_job(job_id, JobStatus::Running, None, None) {
        tracing::error!(job_id, error = %e, "cannot start job");
        return;
    }
    let outcome = infer(store, models, job_id).and_then(|bytes| {
        store
            .advance_job(job_id, JobStatus::Done, None, Some(&bytes))
            .map_err(|e| e.to_string())
    });
    match outcome {
        Ok(_) => tracing::info!(job_id, elapsed_ms = started.elapsed().as_millis() as u64, "job done"),
        Err(message) => {
            tracing::warn!(job_id, error = %message, "job failed");
            if let Err(e) = store.advance_job(job_id, JobStatus::Failed, Some(message), None) {
                tracing::error!(job_id, error = %e, "cannot record failure");
            }
        }
    }
}

/// Runs the model over every window and returns the result frame. Uses only
/// the record's public evaluation key.
fn infer(store: &Store, models: &ModelRegistry, job_id: &str) -> Result<Vec<u8>, String> {
    let job = store.job(job_id).ok_or("job vanished")?;
    let model = models
        .get(&job.model_id)
        .ok_or_else(|| format!("unknown model `{}`", job.model_id))?;
    let record = store.load_record(&job.dataset_id).map_err(|e| e.to_string())?;
    let backend = CkksBackend::new(&record.params, record.relin_key.as_ref()).map_err(|e| e.to_string())?;
    let mut outputs = Vec::with_capacity(record.window_count());
    for window in record.windows() {
        let inputs: Vec<Tensor> = window.iter().cloned().map(Tensor::Encrypted).collect();
        let forward = model.graph.forward(&backend, &inputs).map_err(|e| e.to_string())?;
        let bottom = backend.mod_switch_to(&forward.output, 0).map_err(|e| e.to_string())?;
        outputs.push(bottom.into_ciphertext().expect("ckks backend yields ciphertexts"));
    }
    let mut annotations = serde_json::Map::new();
    annotations.insert("job_id".into(), json!(job.job_id));
    annotations.insert("model_id".into(), json!(job.model_id));
    annotations.insert("source_dataset_id".into(), json!(job.dataset_id));
    annotations.insert("expected_sentinel".into(), json!(model.graph.sentinel_output()));
    let result = EncryptedRecord {
        dataset_name: record.dataset_name.clone(),
        owner: record.owner.clone(),
        submitted_at: Utc::now(),
        window_length: 1,
        feature_count: record.feature_count,
        annotations,
        params: record.params.clone(),
        public_key: None,
        relin_key: None,
        ciphertexts: outputs,
        secret_key: None,
    };
    serialize_record(&result, Mode::Transmission).map_err(|e| e.to_string())
}
