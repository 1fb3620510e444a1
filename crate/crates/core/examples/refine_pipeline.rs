//! Offline refinement of a fragmented result: global linking joins split
//! identities, then interpolation fills the gaps the links opened up.
//!
//! Pass a weights file written by the `aflink_training` example, or let this
//! example train a small model first. The small model is rarely sure enough
//! to clear the 0.95 link threshold, so expect few links from it.
//!
//! ```text
//! cargo run --release --example refine_pipeline -- [weights]
//! ```

use std::path::Path;

use strongtrack::aflink::{generate_training_pairs, plan_links, train, AflinkWeights, LinkThresholds, TrainConfig};
use strongtrack::config::Settings;
use strongtrack::evalkit::{evaluate, generate_scenario, inject_splits, ScenarioSpec};
use strongtrack::workflow::refine_records;

fn weights(arg: Option<String>) -> strongtrack::Result<AflinkWeights<f32>> {
    if let Some(path) = arg {
        return AflinkWeights::load(Path::new(&path));
    }
    let mut pairs = Vec::new();
    for seed in 1050..1054 {
        let gt = generate_scenario(&ScenarioSpec::crossing(seed))?.gt;
        pairs.extend(generate_training_pairs(&gt, 152, seed)?);
    }
    let config = TrainConfig { epochs: 6, ..TrainConfig::default() };
    let (w, report) = train(&pairs, &config)?;
    println!("trained on {} pairs in {:.1?}", pairs.len(), report.elapsed);
    Ok(w)
}

fn main() -> strongtrack::Result<()> {
    let weights = weights(std::env::args().nth(1))?;
    let scene = generate_scenario(&ScenarioSpec::crossing(4))?;
    let (broken, splits) = inject_splits(&scene.gt, 5, 3, 15, 20, 4);
    println!("injected {} splits", splits.len());
    let plan = plan_links(&broken, &weights, &LinkThresholds::default())?;
    let scores: Vec<String> = plan.candidates.iter().map(|(c, s)| format!("{}->{} {s:.3}", c.earlier, c.later)).collect();
    println!("candidates: {}", scores.join(", "));

    for interp in ["none", "li", "gsi"] {
        let mut settings = Settings::default();
        settings.set_flag("interp_mode", interp)?;
        let (refined, summary) = refine_records(&broken, Some(&weights), &settings, None)?;
        let r = evaluate(&scene.gt, &refined, 0.5)?;
        println!(
            "{interp:>4}: ids {} -> {} ({} links, {} rows filled), MOTA {:.4}, IDF1 {:.4}",
            summary.ids_before, summary.ids_after, summary.links, summary.interpolated_rows, r.mota(), r.idf1()
        );
    }
    Ok(())
}
