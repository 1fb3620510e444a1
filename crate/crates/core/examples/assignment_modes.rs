//! Cost blending, gating, and the two assignment modes on a tiny instance.

use nalgebra::DMatrix;
use strongtrack::association::{blend_costs, matching_cascade, solve_assignment, CHI2_GATE_4DOF};

fn main() -> strongtrack::Result<()> {
    // Appearance distances and squared Mahalanobis distances for two tracks
    // against three detections. The third detection is outside both gates.
    let appearance = DMatrix::from_row_slice(2, 3, &[0.10, 0.40, 0.05, 0.35, 0.15, 0.05]);
    let gating = DMatrix::from_row_slice(2, 3, &[1.0, 6.0, 20.0, 5.0, 0.5, 30.0]);
    let cost = blend_costs(&appearance, &gating, 0.98, CHI2_GATE_4DOF)?;
    println!("blended cost:{}", cost.values);
    let r = solve_assignment(&cost, 0.45);
    println!("global:  matches {:?}, unmatched detections {:?}", r.matches, r.unmatched_detections);

    // One detection, two tracks. Track 0 was seen last frame, track 1 three
    // frames ago but fits better. The cascade serves track 0 first.
    let single = blend_costs(
        &DMatrix::from_column_slice(2, 1, &[0.30, 0.10]),
        &DMatrix::from_column_slice(2, 1, &[2.0, 1.0]),
        0.98,
        CHI2_GATE_4DOF,
    )?;
    let cascade = matching_cascade(&[vec![0], vec![1]], &single, 0.45)?;
    let global = solve_assignment(&single, 0.45);
    println!("cascade: {:?}", cascade.matches);
    println!("global:  {:?}", global.matches);
    Ok(())
}
