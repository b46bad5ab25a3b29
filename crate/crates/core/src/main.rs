use clap::Parser;
use tracing_subscriber::EnvFilter;

use mindguide::cli::{self, Cli};

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let code = cli::run(Cli::parse()).await;
    std::process::exit(code);
}
