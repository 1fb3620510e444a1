//! Writes a scenario spec file, reloads it, and materialises the sequence as
//! MOT files plus an embedding sidecar.
//!
//! ```text
//! cargo run --example scenario_gen -- [outdir]
//! ```

use std::path::PathBuf;

use strongtrack::evalkit::{generate_scenario, MotionKind, Occlusion, ScenarioSpec};

fn main() -> strongtrack::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("strongtrack-scenario"));
    std::fs::create_dir_all(&dir).map_err(|e| strongtrack::Error::io(dir.display().to_string(), e))?;

    let spec = ScenarioSpec {
        num_identities: 6,
        num_frames: 120,
        motion: MotionKind::Sinusoidal,
        pan_x: 2.0,
        occlusions: vec![Occlusion { id: 2, start: 40, end: 55 }],
        seed: 21,
        ..ScenarioSpec::default()
    };
    let spec_path = dir.join("scene.txt");
    std::fs::write(&spec_path, spec.to_text()).map_err(|e| strongtrack::Error::io(spec_path.display().to_string(), e))?;
    let reloaded = ScenarioSpec::load(&spec_path)?;
    assert_eq!(reloaded, spec);

    let scene = generate_scenario(&reloaded)?;
    let files = scene.write_to(&dir)?;
    let rows = scene.detections.len();
    println!("{} gt rows, {rows} detections, {} embeddings", scene.gt.len(), scene.embeddings.records.len());
    println!("files: {:?}", files);
    Ok(())
}
