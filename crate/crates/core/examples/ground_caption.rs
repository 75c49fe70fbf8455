//! Grounds a description written in a camera's alias vocabulary.
//!
//! ```text
//! cargo run --example ground_caption -- [CAMERA] [TEXT]
//! ```

use trafficmon::corpus;
use trafficmon::eval::parse_response;
use trafficmon::grounding::{find_alias_matches, substitute_aliases};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let camera_id = args.first().map_or("cam-sw", String::as_str);
    let text = args
        .get(1)
        .map_or("Vehicle 1 is on Section A moving rightward. Vehicle 2 is on section b moving upward. No collision is observed.", String::as_str);
    let camera = corpus::cameras()
        .into_iter()
        .find(|c| c.id() == camera_id)
        .ok_or_else(|| format!("unknown camera {camera_id}"))?;

    for m in find_alias_matches(text, camera.aliases.entries.keys().map(String::as_str)) {
        println!(
            "{:>4}..{:<4} {:<12} -> {}",
            m.start,
            m.end,
            m.alias,
            camera.aliases.real_name(&m.alias).unwrap_or("?")
        );
    }
    println!("grounded: {}", substitute_aliases(text, &camera.aliases));

    let parsed = parse_response(text, &camera.sections);
    println!(
        "parsed ({:?}): {} vehicle(s), collision claim {:?}",
        parsed.mode,
        parsed.mentions.len(),
        parsed.collision_claim
    );
    Ok(())
}
