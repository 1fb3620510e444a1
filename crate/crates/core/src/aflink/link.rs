//! Offline global linking of finished tracklets.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::network::forward_batch;
use super::weights::AflinkWeights;
use super::window::{PairInput, TrackletWindow};
use super::{tracklets_from_records, Tracklet};
use crate::association::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::mot_io::TrackRecord;

const SCORE_CHUNK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkThresholds {
    /// Largest allowed `later.first - earlier.last`, in frames.
    pub max_gap: u32,
    /// Largest allowed distance between the two touching centers, in pixels.
    pub max_dist: f64,
    /// A pair is linkable only when its score is strictly above this.
    pub min_score: f64,
}

impl Default for LinkThresholds {
    fn default() -> Self {
        Self {
            max_gap: 30,
            max_dist: 75.0,
            min_score: 0.95,
        }
    }
}

impl LinkThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.max_gap == 0 || !(self.max_dist >= 0.0) || !self.min_score.is_finite() {
            return Err(Error::Config(format!(
                "link thresholds need max_gap > 0, max_dist >= 0 and a finite min_score, got {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkCandidate {
    pub earlier: u32,
    pub later: u32,
    pub temporal_gap: f64,
    pub spatial_gap: f64,
}

/// Ordered tracklet pairs that pass the gap and distance filters, sorted by
/// `(earlier, later)`.
pub fn link_candidates(tracklets: &[Tracklet], thresholds: &LinkThresholds) -> Vec<LinkCandidate> {
    let mut out = Vec::new();
    for a in tracklets {
        let end = a.points[a.points.len() - 1];
        for b in tracklets {
            if a.id == b.id {
                continue;
            }
            let start = b.points[0];
            let gap = start[0] - end[0];
            if gap <= 0.0 || gap > f64::from(thresholds.max_gap) {
                continue;
            }
            let dist = (start[1] - end[1]).hypot(start[2] - end[2]);
            if dist > thresholds.max_dist {
                continue;
            }
            out.push(LinkCandidate {
                earlier: a.id,
                later: b.id,
                temporal_gap: gap,
                spatial_gap: dist,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinkReport {
    pub candidates: Vec<(LinkCandidate, f64)>,
    /// Accepted `(earlier, later)` links.
    pub links: Vec<(u32, u32)>,
    /// Input id to output id, for every input id.
    pub relabel: BTreeMap<u32, u32>,
}

impl LinkReport {
    pub fn output_ids(&self) -> usize {
        let mut ids: Vec<u32> = self.relabel.values().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

/// Scores candidates, solves one assignment on `1 - score` between earlier
/// and later tracklets, and chains accepted links to the earliest id.
pub fn plan_links(
    records: &[TrackRecord],
    weights: &AflinkWeights<f32>,
    thresholds: &LinkThresholds,
) -> Result<LinkReport> {
    thresholds.validate()?;
    weights.validate()?;
    let tracklets = tracklets_from_records(records)?;
    let by_id: BTreeMap<u32, &Tracklet> = tracklets.iter().map(|t| (t.id, t)).collect();
    let candidates = link_candidates(&tracklets, thresholds);

    let inputs: Vec<PairInput<f32>> = candidates
        .iter()
        .map(|c| {
            PairInput::encode(
                &TrackletWindow::tail(&by_id[&c.earlier].points),
                &TrackletWindow::head(&by_id[&c.later].points),
            )
        })
        .collect();
    let scores: Vec<f64> = inputs
        .par_chunks(SCORE_CHUNK)
        .map(|chunk| forward_batch(weights, chunk))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .map(f64::from)
        .collect();

    let mut earlier_ids: Vec<u32> = candidates.iter().map(|c| c.earlier).collect();
    let mut later_ids: Vec<u32> = candidates.iter().map(|c| c.later).collect();
    earlier_ids.sort_unstable();
    earlier_ids.dedup();
    later_ids.sort_unstable();
    later_ids.dedup();
    let mut cost = CostMatrix::new(DMatrix::from_element(earlier_ids.len(), later_ids.len(), 1.0));
    cost.infeasible.fill(true);
    for (c, &s) in candidates.iter().zip(&scores) {
        if s > thresholds.min_score {
            let r = earlier_ids.binary_search(&c.earlier).expect("present");
            let k = later_ids.binary_search(&c.later).expect("present");
            cost.values[(r, k)] = 1.0 - s;
            cost.infeasible[(r, k)] = false;
        }
    }
    let assignment = solve_assignment(&cost, f64::INFINITY);
    let mut links: Vec<(u32, u32)> = assignment
        .matches
        .iter()
        .map(|&(r, k)| (earlier_ids[r], later_ids[k]))
        .collect();
    links.sort_unstable();

    let parent: BTreeMap<u32, u32> = links.iter().map(|&(e, l)| (l, e)).collect();
    let relabel = tracklets
        .iter()
        .map(|t| {
            let mut root = t.id;
            while let Some(&p) = parent.get(&root) {
                root = p;
            }
            (t.id, root)
        })
        .collect();
    Ok(LinkReport {
        candidates: candidates.into_iter().zip(scores).collect(),
        links,
        relabel,
    })
}

/// Relabels records according to a link plan. Output is sorted by
/// `(frame, id)`.
pub fn apply_links(records: &[TrackRecord], report: &LinkReport) -> Vec<TrackRecord> {
    let mut out: Vec<TrackRecord> = records
        .iter()
        .map(|r| TrackRecord {
            id: report.relabel.get(&r.id).copied().unwrap_or(r.id),
            ..r.clone()
        })
        .collect();
    out.sort_by_key(|r| (r.frame, r.id));
    out
}

/// [`plan_links`] followed by [`apply_links`].
pub fn global_link(
    records: &[TrackRecord],
    weights: &AflinkWeights<f32>,
    thresholds: &LinkThresholds,
) -> Result<Vec<TrackRecord>> {
    let report = plan_links(records, weights, thresholds)?;
    Ok(apply_links(records, &report))
}
