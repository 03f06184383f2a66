//! The data-processing side: accepts encrypted records, runs inference on
//! them with public evaluation keys only, and hands back results switched
//! down to the bottom of the modulus chain.

pub mod api;
pub mod config;
pub mod jobs;
pub mod models;
pub mod store;

pub use api::{router, AppState};
pub use config::ServerConfig;
pub use jobs::{InferenceJob, JobStatus};
pub use models::{ModelEntry, ModelRegistry};
pub use store::{DatasetEntry, Store};

use std::net::SocketAddr;
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("store: {0}")]
    Store(#[from] store::StoreError),
    #[error("models: {0}")]
    Models(#[from] models::ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Opens the store, loads models, starts the worker pool and re-queues any
/// job left unfinished by a previous run.
pub async fn build(config: &ServerConfig) -> Result<(axum::Router, AppState), ServerError> {
    let store = Arc::new(Store::open(&config.store)?);
    let models = Arc::new(ModelRegistry::load_dir(&config.models)?);
    let queue = jobs::start_workers(store.clone(), models.clone(), config.workers, config.queue_capacity);
    for id in store.unfinished_jobs() {
        tracing::info!(job_id = %id, "resuming job");
        queue.resume(id).await;
    }
    let state = AppState {
        store,
        models,
        queue,
        token: Arc::from(config.token.as_str()),
    };
    Ok((router(state.clone(), config.max_body_bytes), state))
}

pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let (app, _) = build(&config).await?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// A server on its own runtime thread, stopped on drop. Used for loopback
/// tests and benchmarks.
pub struct RunningServer {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl RunningServer {
    pub fn start(config: ServerConfig) -> Result<Self, ServerError> {
        let (ready_tx, ready_rx) = std::sync::mpsc::channel();
        let (stop_tx, stop_rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("tokio runtime");
            rt.block_on(async move {
                let started = async {
                    let (app, _) = build(&config).await?;
                    let listener = tokio::net::TcpListener::bind(config.listen).await?;
                    Ok::<_, ServerError>((app, listener))
                }
                .await;
                let (app, listener) = match started {
                    Ok(v) => v,
                    Err(e) => {
                        let _ = ready_tx.send(Err(e));
                        return;
                    }
                };
                let _ = ready_tx.send(listener.local_addr().map_err(ServerError::from));
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = stop_rx.await;
                    })
                    .await;
            });
        });
        let addr = ready_rx.recv().expect("server thread reports readiness")?;
        Ok(Self {
            addr,
            shutdown: Some(stop_tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
