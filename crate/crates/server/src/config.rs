use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

#[derive(Clone, Debug, Parser)]
#[command(name = "edl-server", about = "Encrypted inference service")]
pub struct ServerConfig {
    #[arg(long, env = "EDL_LISTEN", default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    /// Directory holding datasets, jobs and results.
    #[arg(long, env = "EDL_STORE", default_value = "edl-store")]
    pub store: PathBuf,
    /// Directory of `*.json` model files.
    #[arg(long, env = "EDL_MODELS", default_value = "models")]
    pub models: PathBuf,
    #[arg(long, env = "EDL_TOKEN")]
    pub token: String,
    #[arg(long, env = "EDL_MAX_BODY_BYTES", default_value_t = 512 * 1024 * 1024)]
    pub max_body_bytes: usize,
    #[arg(long, env = "EDL_WORKERS", default_value_t = 1)]
    pub workers: usize,
    #[arg(long, env = "EDL_QUEUE_CAPACITY", default_value_t = 64)]
    pub queue_capacity: usize,
}
