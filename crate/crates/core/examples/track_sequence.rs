//! Tracks a generated sequence from files on disk, the way a real detector's
//! output would be consumed, and scores the result.
//!
//! ```text
//! cargo run --release --example track_sequence -- [workdir]
//! ```

use std::path::PathBuf;

use strongtrack::config::Settings;
use strongtrack::evalkit::{evaluate, format_table, generate_scenario, ScenarioSpec};
use strongtrack::mot_io::parse_tracks;
use strongtrack::workflow::{track_file, SequenceFiles};

fn main() -> strongtrack::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("strongtrack-track"));
    let scene = generate_scenario(&ScenarioSpec {
        seed: 7,
        ..ScenarioSpec::default()
    })?;
    let files = scene.write_to(&dir)?;
    println!("scene written to {}", dir.display());

    let out = dir.join("result.txt");
    let manifest = track_file(
        &SequenceFiles {
            detections: files.detections.clone(),
            embeddings: Some(files.embeddings.clone()),
            warps: files.warps.clone(),
        },
        &Settings::default(),
        &out,
    )?;
    print!("{}", manifest.to_text());

    let report = evaluate(&scene.gt, &parse_tracks(&out)?, 0.5)?;
    print!("{}", format_table(&[("seed7".to_string(), report)]));
    Ok(())
}
