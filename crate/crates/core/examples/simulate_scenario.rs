//! Runs one shipped scenario and prints where every entity ends up and the
//! first collision, if any.
//!
//! ```text
//! cargo run --example simulate_scenario -- [SCENARIO]
//! ```

use trafficmon::corpus::{self, first_collision};
use trafficmon::scene::{heading_label, load_scenario, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let id = std::env::args().nth(1).unwrap_or_else(|| "s03".into());
    let config = load_scenario(corpus::shipped_dir().join("scenarios").join(format!("{id}.json")))?;
    let run = run_scenario(&config);
    let last = run.states.last().ok_or("empty run")?;
    println!("{id}: {} ticks, {} entities", run.states.len(), last.entities.len());
    for e in &last.entities {
        let p = e.pose.position();
        println!(
            "  {:<12} at ({:6.3}, {:6.3}) {:<10} collided={}",
            e.id,
            p.x,
            p.y,
            heading_label(e.pose.heading, e.speed).as_str(),
            e.collided
        );
    }
    match first_collision(&config) {
        Some((tick, a, b)) => println!("first collision at tick {tick}: {a} and {b}"),
        None => println!("no collision"),
    }
    Ok(())
}
