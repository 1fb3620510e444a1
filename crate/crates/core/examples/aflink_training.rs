//! Trains the appearance-free link model on pairs cut from synthetic ground
//! truth, then scores a held-out set generated from different scenes.
//!
//! ```text
//! cargo run --release --example aflink_training -- [pairs] [epochs] [weights-out]
//! ```

use std::path::PathBuf;

use strongtrack::aflink::{accuracy, generate_training_pairs, train, LabeledPair, TrainConfig};
use strongtrack::evalkit::{generate_scenario, ScenarioSpec};

fn pairs_from_scenes(seeds: std::ops::Range<u64>, per_scene: usize) -> strongtrack::Result<Vec<LabeledPair>> {
    let mut pairs = Vec::new();
    for seed in seeds {
        // Small arena, fast walkers: plenty of wall bounces and near misses.
        let gt = generate_scenario(&ScenarioSpec::crossing(seed))?.gt;
        pairs.extend(generate_training_pairs(&gt, per_scene, seed)?);
    }
    Ok(pairs)
}

fn main() -> strongtrack::Result<()> {
    let mut args = std::env::args().skip(1);
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let out = args.next().map(PathBuf::from);

    let train_pairs = pairs_from_scenes(1000..1010, count / 10)?;
    let held_out = pairs_from_scenes(1100..1104, 100)?;
    let positives = train_pairs.iter().filter(|p| p.label).count();
    println!("{} training pairs ({positives} positive), {} held out", train_pairs.len(), held_out.len());

    let config = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let (weights, report) = train(&train_pairs, &config)?;
    for (i, loss) in report.epoch_losses.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.5}", i + 1);
    }
    println!(
        "{} steps in {:.2?}; train acc {:.4}, held-out acc {:.4}",
        report.steps,
        report.elapsed,
        accuracy(&weights, &train_pairs)?,
        accuracy(&weights, &held_out)?
    );
    if let Some(path) = out {
        weights.save(&path)?;
        println!("weights written to {}", path.display());
    }
    Ok(())
}
