//! Builds the instruction-tuning corpus for a few scenarios, reads it back
//! and splits it into train and test halves.
//!
//! ```text
//! cargo run --example export_dataset -- [OUT_DIR] [SCENARIO...]
//! ```

use std::path::PathBuf;

use trafficmon::corpus;
use trafficmon::dataset::{import_dataset, read_manifest, split_records};
use trafficmon::pipeline::{export_corpus, BuildOptions, DirSink};
use trafficmon::scene::load_scenario_dir;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = args
        .first()
        .map_or_else(|| std::env::temp_dir().join("trafficmon-dataset"), PathBuf::from);
    let wanted: Vec<&str> = if args.len() > 1 {
        args[1..].iter().map(String::as_str).collect()
    } else {
        vec!["s03", "s07"]
    };

    let mut scenarios = load_scenario_dir(corpus::shipped_dir().join("scenarios"))?;
    scenarios.retain(|s| wanted.contains(&s.id.as_str()));
    let cameras = corpus::cameras();
    export_corpus(&scenarios, &cameras, &BuildOptions::default(), &DirSink::new(&out))?;

    let manifest = read_manifest(&out)?;
    let records = import_dataset(&out)?;
    let (train, test) = split_records(&records, 0.8, 7);
    println!(
        "{} records, {} with a collision, cameras {:?}",
        manifest.count, manifest.collision_count, manifest.cameras
    );
    println!("train {} / test {}", train.len(), test.len());
    if let Some(r) = records.iter().find(|r| !r.tags.is_empty()) {
        println!("{} {:?}\n  {}", r.image_path, r.tags, r.answer);
    }
    println!("written to {}", out.display());
    Ok(())
}
