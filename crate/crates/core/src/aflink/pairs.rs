//! Labelled training pairs cut from ground-truth trajectories.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scalar::Scalar;
use super::window::{PairInput, TrackletWindow, WINDOW_LEN};
use super::{tracklets_from_records, Tracklet};
use crate::error::{Error, Result};
use crate::mot_io::TrackRecord;

/// Shortest tracklet fragment used on either side of a pair.
pub const MIN_SEGMENT_LEN: usize = 10;
const MAX_GAP: u32 = 30;
const MAX_DIST: f64 = 75.0;
const CENTER_JITTER: f64 = 5.0;
const FRAME_JITTER: i64 = 2;
const NEGATIVE_ATTEMPTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPair {
    pub earlier: TrackletWindow,
    pub later: TrackletWindow,
    /// `true` when both fragments come from the same identity.
    pub label: bool,
}

impl LabeledPair {
    pub fn input<T: Scalar>(&self) -> PairInput<T> {
        PairInput::encode(&self.earlier, &self.later)
    }
}

/// Cuts `count` pairs from `gt`, one positive for every three negatives.
///
/// A positive splits one trajectory and drops a random gap of 1 to 30 frames
/// between the halves. A negative joins the end of one identity to the start
/// of another, preferring combinations that would pass the link-time gap and
/// distance filters. Both kinds get the same center and frame jitter.
pub fn generate_training_pairs(gt: &[TrackRecord], count: usize, seed: u64) -> Result<Vec<LabeledPair>> {
    let tracklets = tracklets_from_records(gt)?;
    let positives = count / 4;
    let negatives = count - positives;
    let splittable: Vec<&Tracklet> = tracklets
        .iter()
        .filter(|t| t.points.len() >= 2 * MIN_SEGMENT_LEN + 1)
        .collect();
    let usable: Vec<&Tracklet> = tracklets
        .iter()
        .filter(|t| t.points.len() >= MIN_SEGMENT_LEN)
        .collect();
    if positives > 0 && splittable.is_empty() {
        return Err(Error::Data(format!(
            "no trajectory has the {} rows needed for a positive pair",
            2 * MIN_SEGMENT_LEN + 1
        )));
    }
    if negatives > 0 && usable.len() < 2 {
        return Err(Error::Data(format!(
            "negative pairs need two identities with at least {MIN_SEGMENT_LEN} rows, found {}",
            usable.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    // Interleave so any prefix keeps roughly the stated ratio.
    for k in 0..count {
        let pair = if k % 4 == 0 && k < 4 * positives {
            positive_pair(&splittable, &mut rng)
        } else {
            negative_pair(&usable, &mut rng)
        };
        pairs.push(pair);
    }
    Ok(pairs)
}

fn random_len(rng: &mut ChaCha8Rng, available: usize) -> usize {
    rng.random_range(MIN_SEGMENT_LEN..=available.min(WINDOW_LEN).max(MIN_SEGMENT_LEN))
}

fn positive_pair(splittable: &[&Tracklet], rng: &mut ChaCha8Rng) -> LabeledPair {
    let t = splittable.choose(rng).expect("nonempty");
    let n = t.points.len();
    loop {
        let gap = rng.random_range(1..=MAX_GAP);
        // Earlier fragment ends at row `end`, later starts at the first row
        // at least `gap` frames after it.
        let end = rng.random_range(MIN_SEGMENT_LEN - 1..n - MIN_SEGMENT_LEN);
        let target = t.points[end][0] + f64::from(gap);
        let start = t.points.partition_point(|p| p[0] < target);
        if n - start < MIN_SEGMENT_LEN {
            continue;
        }
        let le = random_len(rng, end + 1);
        let ll = random_len(rng, n - start);
        let earlier = t.points[end + 1 - le..=end].to_vec();
        let later = t.points[start..start + ll].to_vec();
        return jittered(earlier, later, true, rng);
    }
}

fn negative_pair(usable: &[&Tracklet], rng: &mut ChaCha8Rng) -> LabeledPair {
    let mut fallback = None;
    for _ in 0..NEGATIVE_ATTEMPTS {
        let mut picked = usable.choose_multiple(rng, 2);
        let (a, b) = (picked.next().expect("two"), picked.next().expect("two"));
        let end = rng.random_range(MIN_SEGMENT_LEN - 1..a.points.len());
        let gap = rng.random_range(1..=MAX_GAP);
        let target = a.points[end][0] + f64::from(gap);
        let start = b.points.partition_point(|p| p[0] < target);
        let le = random_len(rng, end + 1);
        let earlier = a.points[end + 1 - le..=end].to_vec();
        if b.points.len() - start >= MIN_SEGMENT_LEN {
            let ll = random_len(rng, b.points.len() - start);
            let later = b.points[start..start + ll].to_vec();
            let real_gap = later[0][0] - earlier[le - 1][0];
            let (e, l) = (earlier[le - 1], later[0]);
            let dist = (e[1] - l[1]).hypot(e[2] - l[2]);
            if real_gap <= f64::from(MAX_GAP) && dist <= MAX_DIST {
                return jittered(earlier, later, false, rng);
            }
            if fallback.is_none() {
                fallback = Some((earlier, later));
            }
        } else if fallback.is_none() {
            // The other identity has nothing after this point: borrow a
            // fragment of it and move it in time to follow the first one.
            let s = rng.random_range(0..=b.points.len() - MIN_SEGMENT_LEN);
            let ll = random_len(rng, b.points.len() - s);
            let shift = target - b.points[s][0];
            let later = b.points[s..s + ll]
                .iter()
                .map(|p| [p[0] + shift, p[1], p[2]])
                .collect();
            fallback = Some((earlier, later));
        }
    }
    let (earlier, later) = fallback.expect("at least one attempt records a fallback");
    jittered(earlier, later, false, rng)
}

/// Adds center noise and an order-preserving frame jitter of at most
/// `FRAME_JITTER` to every row of the joined sequence.
fn jittered(
    mut earlier: Vec<[f64; 3]>,
    mut later: Vec<[f64; 3]>,
    label: bool,
    rng: &mut ChaCha8Rng,
) -> LabeledPair {
    let noise = Normal::new(0.0, CENTER_JITTER).expect("positive std");
    let mut prev: Option<f64> = None;
    for row in earlier.iter_mut().chain(later.iter_mut()) {
        let lo = match prev {
            Some(p) => (p + 1.0 - row[0]).max(-FRAME_JITTER as f64) as i64,
            None => -FRAME_JITTER,
        };
        let shift = rng.random_range(lo..=FRAME_JITTER);
        row[0] += shift as f64;
        row[1] += noise.sample(rng);
        row[2] += noise.sample(rng);
        prev = Some(row[0]);
    }
    LabeledPair {
        earlier: TrackletWindow::tail(&earlier),
        later: TrackletWindow::head(&later),
        label,
    }
}
