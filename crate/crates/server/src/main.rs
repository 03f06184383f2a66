use clap::Parser;
use edl_server::ServerConfig;
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .json()
        .init();
    let config = ServerConfig::parse();
    if let Err(e) = edl_server::serve(config).await {
        tracing::error!(error = %e, "server stopped");
        std::process::exit(1);
    }
}
