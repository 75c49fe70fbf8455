//! Renders one camera view of a shipped scenario, raw and highlighted, and
//! prints the caption and the grounded description of that view.
//!
//! ```text
//! cargo run --example render_frame -- [SCENARIO] [CAMERA] [TICK] [OUT_DIR]
//! ```

use std::path::PathBuf;

use trafficmon::camera::rasterize_frame;
use trafficmon::corpus;
use trafficmon::grounding::{caption_frame, substitute_aliases};
use trafficmon::perception::{oracle_detect, overlay_highlight, static_regions, Corruption};
use trafficmon::scene::{load_scenario, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario = args.first().map_or("s03", String::as_str);
    let camera_id = args.get(1).map_or("cam-sw", String::as_str);
    let tick: u64 = args.get(2).map_or(Ok(300), |t| t.parse())?;
    let out = args.get(3).map_or_else(std::env::temp_dir, PathBuf::from);

    let config = load_scenario(corpus::shipped_dir().join("scenarios").join(format!("{scenario}.json")))?;
    let camera = corpus::cameras()
        .into_iter()
        .find(|c| c.id() == camera_id)
        .ok_or_else(|| format!("unknown camera {camera_id}"))?;
    let run = run_scenario(&config);
    let state = run.state_at(tick).ok_or("tick beyond the end of the scenario")?;

    let truth = rasterize_frame(&camera, state);
    let detections = oracle_detect(&truth, Corruption::default(), config.seed);
    let highlighted = overlay_highlight(&truth, &detections, &static_regions(&camera, &config.statics));

    let raw_path = out.join(format!("{scenario}-{camera_id}-{tick}.ppm"));
    let lit_path = out.join(format!("{scenario}-{camera_id}-{tick}-highlighted.ppm"));
    std::fs::write(&raw_path, truth.image.to_ppm())?;
    std::fs::write(&lit_path, highlighted.image.to_ppm())?;

    let caption = caption_frame(&truth);
    println!("caption:  {caption}");
    println!("grounded: {}", substitute_aliases(&caption, &camera.aliases));
    println!("wrote {} and {}", raw_path.display(), lit_path.display());
    Ok(())
}
