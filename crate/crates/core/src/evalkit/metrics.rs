//! CLEAR MOT counts and identity F1.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::association::{solve_subset, CostMatrix};
use crate::error::{Error, Result};
use crate::mot_io::TrackRecord;

/// Counts behind MOTA and IDF1. Reports from several sequences combine with
/// [`MetricReport::merge`], which sums counts rather than averaging ratios.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub gt_count: usize,
    pub pred_count: usize,
    pub matches: usize,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub idtp: usize,
    /// Distinct ids on each side.
    pub gt_ids: usize,
    pub pred_ids: usize,
}

impl MetricReport {
    /// `1 - (fn + fp + ids) / gt_count`; the denominator is taken as 1 when
    /// there is no ground truth.
    pub fn mota(&self) -> f64 {
        1.0 - (self.fn_ + self.fp + self.ids) as f64 / self.gt_count.max(1) as f64
    }

    /// `2 IDTP / (gt_count + pred_count)`; 1 when both sides are empty.
    pub fn idf1(&self) -> f64 {
        let denom = self.gt_count + self.pred_count;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.idtp as f64 / denom as f64
        }
    }

    pub fn idfp(&self) -> usize {
        self.pred_count - self.idtp
    }

    pub fn idfn(&self) -> usize {
        self.gt_count - self.idtp
    }

    pub fn merge(&mut self, other: &MetricReport) {
        self.gt_count += other.gt_count;
        self.pred_count += other.pred_count;
        self.matches += other.matches;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.ids += other.ids;
        self.idtp += other.idtp;
        self.gt_ids += other.gt_ids;
        self.pred_ids += other.pred_ids;
    }

    /// `key=value` lines, one metric per line, prefixed with `prefix.` when
    /// `prefix` is non-empty.
    pub fn to_key_values(&self, prefix: &str) -> String {
        let p = if prefix.is_empty() {
            String::new()
        } else {
            format!("{prefix}.")
        };
        let mut s = String::new();
        let _ = writeln!(s, "{p}mota={:.6}", self.mota());
        let _ = writeln!(s, "{p}idf1={:.6}", self.idf1());
        let _ = writeln!(s, "{p}ids={}", self.ids);
        let _ = writeln!(s, "{p}fp={}", self.fp);
        let _ = writeln!(s, "{p}fn={}", self.fn_);
        let _ = writeln!(s, "{p}gt_count={}", self.gt_count);
        let _ = writeln!(s, "{p}pred_count={}", self.pred_count);
        let _ = writeln!(s, "{p}gt_ids={}", self.gt_ids);
        let _ = writeln!(s, "{p}pred_ids={}", self.pred_ids);
        s
    }
}

/// Aligned text table with one row per named report.
pub fn format_table(rows: &[(String, MetricReport)]) -> String {
    let name_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(8);
    let mut s = format!(
        "{:<name_w$} {:>7} {:>7} {:>6} {:>7} {:>7} {:>7} {:>6} {:>6}\n",
        "sequence", "MOTA", "IDF1", "IDs", "FP", "FN", "GT", "GTids", "PRids"
    );
    for (name, r) in rows {
        let _ = writeln!(
            s,
            "{:<name_w$} {:>6.1}% {:>6.1}% {:>6} {:>7} {:>7} {:>7} {:>6} {:>6}",
            name,
            100.0 * r.mota(),
            100.0 * r.idf1(),
            r.ids,
            r.fp,
            r.fn_,
            r.gt_count,
            r.gt_ids,
            r.pred_ids
        );
    }
    s
}

fn check_threshold(iou_threshold: f64) -> Result<()> {
    if iou_threshold > 0.0 && iou_threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "IoU threshold must lie in (0, 1), got {iou_threshold}"
        )))
    }
}

fn by_frame(records: &[TrackRecord]) -> BTreeMap<u32, Vec<&TrackRecord>> {
    let mut map: BTreeMap<u32, Vec<&TrackRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.frame).or_default().push(r);
    }
    map
}

fn distinct_ids(records: &[TrackRecord]) -> usize {
    let mut ids: Vec<u32> = records.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

/// CLEAR MOT counts under persistent matching: a pair matched earlier is kept
/// while both are present and overlap at `iou_threshold` or more, the rest is
/// matched by minimum `1 - IoU`. A switch is counted whenever a ground-truth
/// id is matched to a different prediction than at its previous match.
pub fn compute_clear(gt: &[TrackRecord], pred: &[TrackRecord], iou_threshold: f64) -> Result<MetricReport> {
    check_threshold(iou_threshold)?;
    let gt_frames = by_frame(gt);
    let pred_frames = by_frame(pred);
    let mut frames: Vec<u32> = gt_frames.keys().chain(pred_frames.keys()).copied().collect();
    frames.sort_unstable();
    frames.dedup();

    let mut report = MetricReport {
        gt_count: gt.len(),
        pred_count: pred.len(),
        gt_ids: distinct_ids(gt),
        pred_ids: distinct_ids(pred),
        ..MetricReport::default()
    };
    let mut last_match: HashMap<u32, u32> = HashMap::new();
    let empty = Vec::new();
    for f in frames {
        let g = gt_frames.get(&f).unwrap_or(&empty);
        let p = pred_frames.get(&f).unwrap_or(&empty);
        let iou = DMatrix::from_fn(g.len(), p.len(), |i, j| g[i].bbox.iou(&p[j].bbox));
        let mut g_used = vec![false; g.len()];
        let mut p_used = vec![false; p.len()];
        let mut pairs = Vec::new();
        for (i, gr) in g.iter().enumerate() {
            let Some(&prev) = last_match.get(&gr.id) else {
                continue;
            };
            if let Some(j) = p.iter().position(|pr| pr.id == prev) {
                if !p_used[j] && iou[(i, j)] >= iou_threshold {
                    g_used[i] = true;
                    p_used[j] = true;
                    pairs.push((i, j));
                }
            }
        }
        let rows: Vec<usize> = (0..g.len()).filter(|&i| !g_used[i]).collect();
        let cols: Vec<usize> = (0..p.len()).filter(|&j| !p_used[j]).collect();
        let mut cost = CostMatrix::new(iou.map(|v| 1.0 - v));
        cost.infeasible = iou.map(|v| v < iou_threshold);
        let fresh = solve_subset(&cost, &rows, &cols, 1.0 - iou_threshold);
        for &(i, j) in &fresh.matches {
            let (gid, pid) = (g[i].id, p[j].id);
            if last_match.get(&gid).is_some_and(|&prev| prev != pid) {
                report.ids += 1;
            }
            pairs.push((i, j));
        }
        for &(i, j) in &pairs {
            last_match.insert(g[i].id, p[j].id);
        }
        report.matches += pairs.len();
        report.fn_ += g.len() - pairs.len();
        report.fp += p.len() - pairs.len();
    }
    report.idtp = compute_idtp(gt, pred, iou_threshold);
    Ok(report)
}

/// Frames in which each `(gt id, pred id)` pair overlaps at the threshold.
fn overlap_counts(gt: &[TrackRecord], pred: &[TrackRecord], iou_threshold: f64) -> (Vec<u32>, Vec<u32>, DMatrix<f64>) {
    let mut gids: Vec<u32> = gt.iter().map(|r| r.id).collect();
    let mut pids: Vec<u32> = pred.iter().map(|r| r.id).collect();
    gids.sort_unstable();
    gids.dedup();
    pids.sort_unstable();
    pids.dedup();
    let mut counts = DMatrix::zeros(gids.len(), pids.len());
    let pred_frames = by_frame(pred);
    for g in gt {
        let Some(ps) = pred_frames.get(&g.frame) else {
            continue;
        };
        let gi = gids.binary_search(&g.id).expect("present");
        for p in ps {
            if g.bbox.iou(&p.bbox) >= iou_threshold {
                let pj = pids.binary_search(&p.id).expect("present");
                counts[(gi, pj)] += 1.0;
            }
        }
    }
    (gids, pids, counts)
}

fn compute_idtp(gt: &[TrackRecord], pred: &[TrackRecord], iou_threshold: f64) -> usize {
    let (_, _, counts) = overlap_counts(gt, pred, iou_threshold);
    if counts.is_empty() {
        return 0;
    }
    // IDFP and IDFN both equal a total minus IDTP, so the optimal identity
    // bijection is the one that maximises matched overlap.
    let cost = CostMatrix::new(counts.map(|c| -c));
    let rows: Vec<usize> = (0..counts.nrows()).collect();
    let cols: Vec<usize> = (0..counts.ncols()).collect();
    solve_subset(&cost, &rows, &cols, f64::INFINITY)
        .matches
        .iter()
        .map(|&(i, j)| counts[(i, j)] as usize)
        .sum()
}

/// Identity F1 under the optimal trajectory-level bijection.
pub fn compute_idf1(gt: &[TrackRecord], pred: &[TrackRecord], iou_threshold: f64) -> Result<f64> {
    check_threshold(iou_threshold)?;
    let report = MetricReport {
        gt_count: gt.len(),
        pred_count: pred.len(),
        idtp: compute_idtp(gt, pred, iou_threshold),
        ..MetricReport::default()
    };
    Ok(report.idf1())
}

/// CLEAR counts and IDF1 together.
pub fn evaluate(gt: &[TrackRecord], pred: &[TrackRecord], iou_threshold: f64) -> Result<MetricReport> {
    compute_clear(gt, pred, iou_threshold)
}
