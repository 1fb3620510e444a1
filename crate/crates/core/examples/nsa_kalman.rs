//! How confidence-adaptive measurement noise changes a Kalman correction.
//!
//! A track sitting at x = 100 receives a detection at x = 110. With the plain
//! filter the pull towards the detection is the same for every confidence;
//! with adaptive noise a confident detection pulls much harder.

use strongtrack::motion::{initiate, MeasurementNoiseModel};

fn main() -> strongtrack::Result<()> {
    let state = initiate([100.0, 200.0, 0.5, 80.0])?.predict();
    let detection = [110.0, 200.0, 0.5, 80.0];
    println!("{:>10} {:>12} {:>12} {:>14}", "confidence", "plain cx", "nsa cx", "nsa var(cx)");
    for confidence in [0.1, 0.5, 0.8, 0.95, 0.99] {
        let plain = MeasurementNoiseModel {
            nsa_enabled: false,
            ..MeasurementNoiseModel::default()
        };
        let nsa = MeasurementNoiseModel::default();
        let a = state.update(detection, confidence, &plain)?;
        let b = state.update(detection, confidence, &nsa)?;
        println!(
            "{confidence:>10.2} {:>12.3} {:>12.3} {:>14.4}",
            a.mean[0], b.mean[0], b.covariance[(0, 0)]
        );
    }

    // Gating always uses the preset noise, so a confident update does not
    // shrink the gate for the next frame's candidates.
    let nsa = MeasurementNoiseModel::default();
    let next = state.update(detection, 0.99, &nsa)?.predict();
    let d = next.gating_distance(&[[112.0, 200.0, 0.5, 80.0], [140.0, 200.0, 0.5, 80.0]], &nsa)?;
    println!("gating distances next frame: {:.2} (near), {:.2} (far)", d[0], d[1]);
    Ok(())
}
