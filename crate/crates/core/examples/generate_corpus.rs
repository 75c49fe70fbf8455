//! Regenerates the shipped scenario corpus and alias tables.
//!
//! ```text
//! cargo run --example generate_corpus -- [OUT_DIR]
//! ```

use std::path::PathBuf;
use std::time::Instant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(trafficmon::corpus::shipped_dir);
    let start = Instant::now();
    let scenarios = trafficmon::corpus::generate_scenarios();
    let collisions = scenarios
        .iter()
        .filter(|s| trafficmon::corpus::first_collision(s).is_some())
        .count();
    trafficmon::corpus::write_corpus(&out)?;
    println!(
        "{} scenarios ({collisions} with a collision) written to {} in {:.1?}",
        scenarios.len(),
        out.display(),
        start.elapsed()
    );
    Ok(())
}
