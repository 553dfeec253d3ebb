//! Serves a bundle written by the CLI or `bundle_pipeline`.
//!
//!     cargo run --release --example serve_bundle target/example-bundle/bundle

use topiclink::config::ServeConfig;
use topiclink::service::{serve, ServiceState};
use topiclink::store::Bundle;

#[tokio::main]
async fn main() -> topiclink::Result<()> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "target/example-bundle/bundle".into());
    let state = ServiceState::from_bundle(&Bundle::open(dir.as_ref())?)?;
    let config = ServeConfig { cors_origin: "*".into(), ..ServeConfig::default() };
    println!(
        "{} documents, {} topics on http://{}:{}/api/tree",
        state.docs.len(),
        state.tree.total_topics(),
        config.host,
        config.port
    );
    serve(state, &config).await
}
