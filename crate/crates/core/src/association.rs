//! Cost construction and track–detection assignment.

use nalgebra::DMatrix;

use crate::assignment::linear_sum_assignment;
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Chi-square 0.95 quantile with 4 degrees of freedom.
pub const CHI2_GATE_4DOF: f64 = 9.4877;

/// Track × detection costs with a feasibility mask. Masked entries are never
/// selected.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub values: DMatrix<f64>,
    pub infeasible: DMatrix<bool>,
}

impl CostMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        let infeasible = values.map(|v| !v.is_finite());
        Self { values, infeasible }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        !self.infeasible[(row, col)] && self.values[(row, col)].is_finite()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentResult {
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// `C = λ A_a + (1 - λ) A_m` with `A_m = min(gating_sq / gate, 1)`; entries
/// whose squared Mahalanobis distance exceeds the gate are masked.
pub fn blend_costs(
    appearance: &DMatrix<f64>,
    gating_sq: &DMatrix<f64>,
    lambda: f64,
    gate_threshold: f64,
) -> Result<CostMatrix> {
    if appearance.shape() != gating_sq.shape() {
        return Err(Error::Domain(format!(
            "appearance cost is {:?} but gating matrix is {:?}",
            appearance.shape(),
            gating_sq.shape()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    if !(gate_threshold > 0.0) {
        return Err(Error::Domain(format!(
            "gate threshold must be positive, got {gate_threshold}"
        )));
    }
    let values = appearance.zip_map(gating_sq, |a, g| {
        let motion = (g / gate_threshold).min(1.0);
        lambda * a + (1.0 - lambda) * motion
    });
    let infeasible = gating_sq.map(|g| !(g <= gate_threshold));
    Ok(CostMatrix { values, infeasible })
}

/// `1 - IoU` between predicted track boxes and detection boxes.
pub fn iou_cost(tracks: &[BBox], detections: &[BBox]) -> CostMatrix {
    let values = DMatrix::from_fn(tracks.len(), detections.len(), |i, j| {
        1.0 - tracks[i].iou(&detections[j])
    });
    CostMatrix::new(values)
}

/// Optimal assignment restricted to the given rows and columns. Returned
/// indices are global. Matches that are masked or cost more than `max_cost`
/// are demoted to unmatched.
pub fn solve_subset(
    cost: &CostMatrix,
    rows: &[usize],
    cols: &[usize],
    max_cost: f64,
) -> AssignmentResult {
    let mut result = AssignmentResult::default();
    if rows.is_empty() || cols.is_empty() {
        result.unmatched_tracks = rows.to_vec();
        result.unmatched_detections = cols.to_vec();
        return result;
    }
    let k = rows.len().min(cols.len()) as f64;
    let max_abs = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
        .filter(|&(r, c)| cost.is_feasible(r, c))
        .map(|(r, c)| cost.values[(r, c)].abs())
        .fold(0.0f64, f64::max);
    // Any assignment using one more masked pair costs strictly more than any
    // using one fewer, so feasible cardinality is maximised first.
    let big = 2.0 * k * max_abs + 1.0;
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        let (r, c) = (rows[i], cols[j]);
        if cost.is_feasible(r, c) {
            cost.values[(r, c)]
        } else {
            big
        }
    });
    let mut row_used = vec![false; rows.len()];
    let mut col_used = vec![false; cols.len()];
    for (i, j) in linear_sum_assignment(&sub) {
        let (r, c) = (rows[i], cols[j]);
        if cost.is_feasible(r, c) && cost.values[(r, c)] <= max_cost {
            result.matches.push((r, c));
            row_used[i] = true;
            col_used[j] = true;
        }
    }
    result.unmatched_tracks = rows
        .iter()
        .zip(&row_used)
        .filter(|(_, &u)| !u)
        .map(|(&r, _)| r)
        .collect();
    result.unmatched_detections = cols
        .iter()
        .zip(&col_used)
        .filter(|(_, &u)| !u)
        .map(|(&c, _)| c)
        .collect();
    result
}

/// Global minimum-cost assignment over the whole matrix.
pub fn solve_assignment(cost: &CostMatrix, max_cost: f64) -> AssignmentResult {
    let (n, m) = cost.shape();
    let rows: Vec<usize> = (0..n).collect();
    let cols: Vec<usize> = (0..m).collect();
    solve_subset(cost, &rows, &cols, max_cost)
}

/// Age-prioritised matching: each group (ordered by ascending time since
/// update) is solved against the detections still unmatched.
pub fn matching_cascade(
    groups: &[Vec<usize>],
    cost: &CostMatrix,
    max_cost: f64,
) -> Result<AssignmentResult> {
    let (n, m) = cost.shape();
    let mut seen = vec![false; n];
    for &t in groups.iter().flatten() {
        if t >= n {
            return Err(Error::Domain(format!("track index {t} out of range for {n} rows")));
        }
        if std::mem::replace(&mut seen[t], true) {
            return Err(Error::Domain(format!("track {t} appears in two cascade groups")));
        }
    }
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut result = AssignmentResult::default();
    for group in groups {
        if group.is_empty() {
            continue;
        }
        let step = solve_subset(cost, group, &remaining, max_cost);
        result.matches.extend(step.matches);
        result.unmatched_tracks.extend(step.unmatched_tracks);
        remaining = step.unmatched_detections;
    }
    result.unmatched_detections = remaining;
    Ok(result)
}
