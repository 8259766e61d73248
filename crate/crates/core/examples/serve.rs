//! Starts the HTTP service on an ephemeral rules file.
//!
//! ```text
//! cargo run --example serve
//! curl -s localhost:8080/v1/moderate -d '{"text":"Follow #PurgeThem now"}' -H 'content-type: application/json'
//! ```
use std::sync::Arc;

use hatemod::service::{serve, AppState, ConfigLayer, ServiceConfig};
use hatemod::synthetic::DEMO_RULES;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let rules = dir.path().join("rules.tsv");
    std::fs::write(&rules, DEMO_RULES)?;
    let flags = ConfigLayer {
        rules_path: Some(rules),
        feedback_store_path: Some(dir.path().join("feedback.db")),
        ..Default::default()
    };
    let env = ConfigLayer::from_env(std::env::vars())?;
    let cfg = ServiceConfig::resolve(flags, env, ConfigLayer::default())?;
    println!("listening on 0.0.0.0:{}", cfg.port);
    serve(Arc::new(AppState::from_config(&cfg)?), cfg.port).await?;
    Ok(())
}
