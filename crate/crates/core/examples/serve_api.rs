//! Starts the HTTP API on the shipped demo config, drives it with a few
//! requests and shuts down. Runs are stored under a temporary directory.
//!
//! ```text
//! cargo run --example serve_api
//! ```

use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use trafficmon::corpus;
use trafficmon::service::{router, AppState, ServiceConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut config = ServiceConfig::load(&corpus::shipped_dir().join("demo.json"))?;
    let store = std::env::temp_dir().join(format!("trafficmon-store-{}", std::process::id()));
    config.store_root = store.clone();
    let state = Arc::new(AppState::load(config)?);

    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let base = format!("http://{}", listener.local_addr()?);
    tokio::spawn(async move { axum::serve(listener, router(state)).await });
    let http = reqwest::Client::new();

    let cameras: Vec<Value> = http.get(format!("{base}/cameras")).send().await?.json().await?;
    for c in &cameras {
        println!("{} aliases {}", c["id"], c["aliases"]);
    }

    let answer: Value = http
        .post(format!("{base}/query"))
        .json(&json!({ "camera_id": "cam-sw", "tick": 300, "scenario": "s03" }))
        .send()
        .await?
        .json()
        .await?;
    println!("grounded: {}", answer["grounded_text"]);

    let run: Value = http
        .post(format!("{base}/scenarios/s03/run"))
        .send()
        .await?
        .json()
        .await?;
    let id = run["id"].as_str().ok_or("no run id")?.to_owned();
    let run = loop {
        let r: Value = http.get(format!("{base}/runs/{id}")).send().await?.json().await?;
        if !matches!(r["status"].as_str(), Some("pending" | "running")) {
            break r;
        }
        tokio::time::sleep(Duration::from_millis(100)).await;
    };
    println!("run {id}: {}", run["status"]);

    std::fs::remove_dir_all(&store)?;
    Ok(())
}
