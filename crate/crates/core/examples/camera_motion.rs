//! Camera motion compensation on a panning scene. The same detections are
//! tracked with and without applying the per-frame warps.

use strongtrack::evalkit::{evaluate, generate_scenario, ScenarioSpec};
use strongtrack::mot_io::WarpMatrix;
use strongtrack::motion::initiate;
use strongtrack::tracker::{run_sequence, SequenceBundle, TrackerConfig};

fn main() -> strongtrack::Result<()> {
    // A single state moved by a pure translation.
    let state = initiate([320.0, 240.0, 0.5, 100.0])?;
    let warped = state.apply_warp(&WarpMatrix::translation(2, -15.0, 4.0));
    println!(
        "center ({:.1}, {:.1}) -> ({:.1}, {:.1})",
        state.mean[0], state.mean[1], warped.mean[0], warped.mean[1]
    );

    println!("{:>6} {:>6} {:>8} {:>6} {:>8}", "pan", "cmc", "IDF1", "IDs", "MOTA");
    for pan in [0.0, 10.0, 20.0, 30.0] {
        let scene = generate_scenario(&ScenarioSpec {
            pan_x: pan,
            pan_y: pan / 4.0,
            ..ScenarioSpec::crossing(3)
        })?;
        let bundle = SequenceBundle::new(scene.detections.clone()).with_warps(scene.warps.clone());
        for cmc in [false, true] {
            let config = TrackerConfig {
                cmc,
                ..TrackerConfig::default()
            };
            let r = evaluate(&scene.gt, &run_sequence(&bundle, &config)?, 0.5)?;
            println!("{pan:>6.1} {cmc:>6} {:>8.4} {:>6} {:>8.4}", r.idf1(), r.ids, r.mota());
        }
    }
    Ok(())
}
