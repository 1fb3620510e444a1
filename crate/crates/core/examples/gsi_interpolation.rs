//! Linear interpolation versus Gaussian-smoothed interpolation on a noisy
//! curved trajectory with missing frames.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use strongtrack::interpolation::{adaptive_lambda, gsi_smooth, linear_interpolate, GsiConfig, TrajectorySeries};

fn truth(f: u32) -> [f64; 4] {
    let t = f as f64;
    [100.0 + 3.0 * t, 200.0 + 40.0 * (t / 15.0).sin(), 40.0, 90.0]
}

fn rmse(series: &TrajectorySeries) -> f64 {
    let sq: f64 = series
        .frames
        .iter()
        .zip(&series.positions)
        .map(|(&f, p)| {
            let t = truth(f);
            (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)
        })
        .sum();
    (sq / series.len() as f64).sqrt()
}

fn main() -> strongtrack::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 3.0).expect("valid std");
    // Frames 30..=41 and 70..=75 are missing.
    let frames: Vec<u32> = (1..=100).filter(|f| !(30..=41).contains(f) && !(70..=75).contains(f)).collect();
    let positions = frames
        .iter()
        .map(|&f| {
            let mut p = truth(f);
            p[0] += noise.sample(&mut rng);
            p[1] += noise.sample(&mut rng);
            p
        })
        .collect();
    let series = TrajectorySeries::new(1, frames, positions)?;
    let config = GsiConfig::default();

    let li = linear_interpolate(&series, config.max_gap);
    let gsi = gsi_smooth(&series, &config)?;
    println!("observed rows {}, filled rows {}", series.len(), li.len());
    println!("length scale for 100 rows: {:.2}", adaptive_lambda(100, config.tau, config.lambda_min));
    println!("center RMSE  raw {:.3}  linear {:.3}  gsi {:.3}", rmse(&series), rmse(&li), rmse(&gsi));
    for f in [35, 72] {
        let k = gsi.frames.iter().position(|&g| g == f).expect("gap was filled");
        let j = li.frames.iter().position(|&g| g == f).expect("gap was filled");
        println!(
            "frame {f}: truth y {:.1}, linear {:.1}, gsi {:.1}",
            truth(f)[1],
            li.positions[j][1],
            gsi.positions[k][1]
        );
    }
    Ok(())
}
