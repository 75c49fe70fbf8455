//! Sends one highlighted frame to a model server and grounds the reply.
//! Without an endpoint argument a toy server that always answers the same
//! sentence is started in-process.
//!
//! ```text
//! cargo run --example query_remote -- [ENDPOINT]
//! ```

use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::routing::post;
use axum::{Json, Router};

use trafficmon::camera::rasterize_frame;
use trafficmon::corpus;
use trafficmon::dataset::DEFAULT_QUERY;
use trafficmon::gateway::{ChatReply, ChatRequest, QueryRequest, VlmClient};
use trafficmon::perception::{oracle_detect, overlay_highlight, static_regions, Corruption};
use trafficmon::scene::{load_scenario, run_scenario};

async fn toy_model(Json(req): Json<ChatRequest>) -> Json<ChatReply> {
    tracing::info!(camera = %req.camera_id, tick = req.tick, bytes = req.image_b64.len(), "chat request");
    Json(ChatReply {
        text: "Vehicle 1 is on Section A moving rightward. No collision is observed.".into(),
    })
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let endpoint = match std::env::args().nth(1) {
        Some(url) => url,
        None => {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
            let addr = listener.local_addr()?;
            let app = Router::new()
                .route("/v1/chat", post(toy_model))
                .layer(DefaultBodyLimit::disable());
            tokio::spawn(async move { axum::serve(listener, app).await });
            format!("http://{addr}")
        }
    };

    let config = load_scenario(corpus::shipped_dir().join("scenarios/s03.json"))?;
    let camera = corpus::cameras().remove(0);
    let run = run_scenario(&config);
    let truth = rasterize_frame(&camera, run.state_at(300).ok_or("short run")?);
    let detections = oracle_detect(&truth, Corruption::default(), config.seed);
    let highlighted = overlay_highlight(&truth, &detections, &static_regions(&camera, &config.statics));

    let client = VlmClient::new(endpoint, Duration::from_secs(30), 2, 4);
    let request = QueryRequest {
        request_id: 1,
        camera_id: camera.id().to_owned(),
        tick: truth.tick,
        prompt: DEFAULT_QUERY.to_owned(),
        image: Arc::new(highlighted),
    };
    let reply = client.query_remote(&request, &camera.aliases).await?;
    println!("raw:      {}", reply.raw_text);
    println!("grounded: {}", reply.grounded_text);
    println!("{:.1} ms, {} retries", reply.latency_ms, reply.retries);
    Ok(())
}
