//! Scores the scripted responder on shipped scenarios, once exact and once
//! with injected location and direction errors.
//!
//! ```text
//! cargo run --example evaluate_oracle -- [P_LOC] [P_DIR] [SCENARIO...]
//! ```

use std::sync::Arc;

use trafficmon::corpus;
use trafficmon::dataset::DEFAULT_QUERY;
use trafficmon::gateway::{ErrorRates, Responder};
use trafficmon::pipeline::{evaluate, HighlightOptions};
use trafficmon::scene::load_scenario_dir;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let p_loc: f64 = args.first().map_or(Ok(0.157), |s| s.parse())?;
    let p_dir: f64 = args.get(1).map_or(Ok(0.236), |s| s.parse())?;
    let wanted = &args[args.len().min(2)..];

    let mut scenarios = load_scenario_dir(corpus::shipped_dir().join("scenarios"))?;
    if !wanted.is_empty() {
        scenarios.retain(|s| wanted.contains(&s.id));
    }
    let cameras = Arc::new(corpus::cameras());

    for rates in [
        ErrorRates::default(),
        ErrorRates {
            p_loc,
            p_dir,
            p_col: 0.0,
        },
    ] {
        let responder = Arc::new(Responder::Oracle { rates, seed: 1 });
        let report = evaluate(
            &scenarios,
            cameras.clone(),
            responder,
            HighlightOptions::default(),
            DEFAULT_QUERY,
        )
        .await?;
        println!(
            "p_loc {:.3} p_dir {:.3}: {} frames, {} vehicles, location {:.4}, steering {:.4}, collision {:.4}",
            rates.p_loc,
            rates.p_dir,
            report.frames_scored,
            report.vehicles,
            report.location_accuracy,
            report.steering_accuracy,
            report.collision_accuracy
        );
    }
    Ok(())
}
