//! Tallies the oracle detector against ground truth on one scenario, with
//! and without corruption, and prints per-class precision, recall and F1.
//!
//! ```text
//! cargo run --example detector_metrics -- [DROP_RATE] [MISLABEL_RATE]
//! ```

use trafficmon::camera::capture_stream;
use trafficmon::corpus;
use trafficmon::perception::{detector_metrics, oracle_detect, ConfusionMatrix, Corruption};
use trafficmon::scene::{load_scenario, run_scenario};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let drop_rate: f64 = args.first().map_or(Ok(0.1), |s| s.parse())?;
    let mislabel_rate: f64 = args.get(1).map_or(Ok(0.05), |s| s.parse())?;

    let config = load_scenario(corpus::shipped_dir().join("scenarios/s03.json"))?;
    let run = run_scenario(&config);
    let frames: Vec<_> = corpus::cameras().iter().flat_map(|c| capture_stream(c, &run)).collect();

    for corruption in [
        Corruption::default(),
        Corruption {
            drop_rate,
            mislabel_rate,
        },
    ] {
        let mut cm = ConfusionMatrix::default();
        for frame in &frames {
            cm.tally(frame, &oracle_detect(frame, corruption, 3), 0.5);
        }
        println!(
            "drop {:.2} mislabel {:.2} over {} frames",
            corruption.drop_rate,
            corruption.mislabel_rate,
            frames.len()
        );
        for (class, m) in detector_metrics(&cm) {
            let c = cm.classes[&class];
            println!(
                "  {class:?}: tp {} fp {} fn {}  precision {:.3} recall {:.3} f1 {:.3}",
                c.tp, c.fp, c.fn_, m.precision, m.recall, m.f1
            );
        }
    }
    Ok(())
}
