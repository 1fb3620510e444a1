//! Compares the full tracker configuration with the baseline on seeded
//! crossing-and-occlusion scenes.
//!
//! ```text
//! cargo run --release --example ablation -- [seeds]
//! ```

use strongtrack::evalkit::{evaluate, generate_scenario, ScenarioSpec};
use strongtrack::tracker::{run_sequence, SequenceBundle, TrackerConfig};

fn main() -> strongtrack::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let configs = [("full", TrackerConfig::default()), ("baseline", TrackerConfig::baseline())];
    println!("{:>4} {:>10} {:>8} {:>6} {:>8}", "seed", "config", "IDF1", "IDs", "MOTA");
    let mut wins = 0;
    for seed in 0..seeds {
        let scene = generate_scenario(&ScenarioSpec::crossing(seed))?;
        let bundle = SequenceBundle::new(scene.detections.clone());
        let mut scores = Vec::new();
        for (name, config) in &configs {
            let out = run_sequence(&bundle, config)?;
            let r = evaluate(&scene.gt, &out, 0.5)?;
            println!("{seed:>4} {name:>10} {:>8.4} {:>6} {:>8.4}", r.idf1(), r.ids, r.mota());
            scores.push((r.idf1(), r.ids));
        }
        if scores[0].0 > scores[1].0 && scores[0].1 < scores[1].1 {
            wins += 1;
        }
    }
    println!("full beats baseline on IDF1 and IDs in {wins}/{seeds} seeds");
    Ok(())
}
