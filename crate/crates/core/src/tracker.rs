//! Frame-by-frame tracking: camera compensation, prediction, association,
//! correction and track lifecycle.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::appearance::{appearance_cost_matrix, AppearanceState, DEFAULT_BANK_SIZE};
use crate::association::{
    blend_costs, iou_cost, matching_cascade, solve_subset, AssignmentResult, CostMatrix,
    CHI2_GATE_4DOF,
};
use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mot_io::{Detection, DetectionSet, TrackRecord, WarpMap, WarpMatrix};
use crate::motion::{initiate, KalmanState, MeasurementNoiseModel, NoiseBase};

/// Largest `1 - IoU` accepted by the IoU association stage.
pub const IOU_MAX_COST: f64 = 0.7;

/// Switches and constants of the tracker. [`TrackerConfig::default`] is the
/// full configuration (NSA, EMA, motion cost, global assignment, CMC).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    /// Confidence-adaptive measurement noise.
    pub nsa: bool,
    /// EMA appearance state instead of a feature bank.
    pub ema: bool,
    /// Add the motion term to the matching cost.
    pub mc: bool,
    /// Age-prioritised matching cascade instead of one global assignment.
    pub cascade: bool,
    /// Apply per-frame camera warps to track states.
    pub cmc: bool,
    /// Second IoU stage for tentative and just-missed tracks.
    pub iou_stage: bool,
    /// Use appearance embeddings at all. Off means motion-only association.
    pub appearance: bool,
    /// Emit matched detection boxes rather than filtered state boxes.
    pub output_raw_boxes: bool,
    pub lambda: f64,
    pub max_cost: f64,
    pub gate_threshold: f64,
    pub ema_alpha: f64,
    pub min_confidence: f64,
    pub bank_size: usize,
    pub n_init: u32,
    pub max_age: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            nsa: true,
            ema: true,
            mc: true,
            cascade: false,
            cmc: true,
            iou_stage: true,
            appearance: true,
            output_raw_boxes: false,
            lambda: 0.98,
            max_cost: 0.45,
            gate_threshold: CHI2_GATE_4DOF,
            ema_alpha: 0.9,
            min_confidence: 0.6,
            bank_size: DEFAULT_BANK_SIZE,
            n_init: 3,
            max_age: 30,
        }
    }
}

impl TrackerConfig {
    /// Every upgrade switched off: feature bank, appearance-only cost with
    /// motion gating, matching cascade, plain Kalman noise, no compensation.
    pub fn baseline() -> Self {
        Self {
            nsa: false,
            ema: false,
            mc: false,
            cascade: true,
            cmc: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init < 1 || self.max_age < 1 {
            return Err(Error::Config(format!(
                "n_init and max_age must be at least 1 (got {} and {})",
                self.n_init, self.max_age
            )));
        }
        for (name, v) in [("lambda", self.lambda), ("ema_alpha", self.ema_alpha)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.max_cost > 0.0) || !(self.gate_threshold > 0.0) {
            return Err(Error::Config("max_cost and gate_threshold must be positive".into()));
        }
        if self.bank_size == 0 {
            return Err(Error::Config("bank_size must be at least 1".into()));
        }
        Ok(())
    }

    fn noise_model(&self) -> MeasurementNoiseModel {
        MeasurementNoiseModel {
            base: NoiseBase::HeightScaled,
            nsa_enabled: self.nsa,
        }
    }

    fn new_appearance(&self) -> AppearanceState {
        if self.ema {
            AppearanceState::ema(self.ema_alpha).expect("alpha validated")
        } else {
            AppearanceState::bank(self.bank_size)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Deleted,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u32,
    pub kalman: KalmanState,
    pub appearance: AppearanceState,
    pub status: TrackStatus,
    pub hits: u32,
    pub time_since_update: u32,
    /// `(frame, detection box, detection confidence)` per successful update.
    pub history: Vec<(u32, BBox, f64)>,
}

impl Track {
    pub fn predicted_box(&self) -> BBox {
        BBox::from_xyah(self.kalman.measurement())
    }
}

/// Pipeline stages a [`Tracker`] has executed, for inspecting which path an
/// ablation configuration takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    ApplyWarp,
    Predict,
    AppearanceCost,
    GatingDistance,
    MotionCost,
    MatchingCascade,
    GlobalAssignment,
    IouAssignment,
    AdaptiveNoiseUpdate,
    FixedNoiseUpdate,
    EmaUpdate,
    BankUpdate,
}

/// Per-sequence tracker state.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    noise: MeasurementNoiseModel,
    tracks: Vec<Track>,
    next_id: u32,
    last_frame: Option<u32>,
    stages: BTreeSet<Stage>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            noise: config.noise_model(),
            config,
            tracks: Vec::new(),
            next_id: 1,
            last_frame: None,
            stages: BTreeSet::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn stages_invoked(&self) -> &BTreeSet<Stage> {
        &self.stages
    }

    /// Processes one frame and returns the confirmed tracks updated in it,
    /// sorted by id.
    pub fn step(
        &mut self,
        frame: u32,
        detections: &[Detection],
        warp: &WarpMatrix,
    ) -> Result<Vec<TrackRecord>> {
        if frame == 0 || self.last_frame.is_some_and(|last| frame <= last) {
            return Err(Error::Sequence(format!(
                "frame {frame} does not follow frame {:?}",
                self.last_frame
            )));
        }
        self.last_frame = Some(frame);
        let use_appearance = self.config.appearance;
        if use_appearance {
            if let Some(d) = detections.iter().find(|d| d.embedding.is_none()) {
                return Err(Error::MissingEmbedding {
                    frame,
                    index: d.source_index,
                });
            }
        }

        if self.config.cmc && !warp.is_identity() {
            self.stages.insert(Stage::ApplyWarp);
            for t in &mut self.tracks {
                t.kalman = t.kalman.apply_warp(warp);
            }
        }
        self.stages.insert(Stage::Predict);
        for t in &mut self.tracks {
            t.kalman = t.kalman.predict();
            t.time_since_update += 1;
        }

        let assignment = self.associate(detections)?;

        for &(ti, di) in &assignment.matches {
            self.update_track(ti, frame, &detections[di])?;
        }
        for &ti in &assignment.unmatched_tracks {
            let t = &mut self.tracks[ti];
            if t.status == TrackStatus::Tentative || t.time_since_update > self.config.max_age {
                t.status = TrackStatus::Deleted;
            }
        }
        for &di in &assignment.unmatched_detections {
            self.spawn(frame, &detections[di])?;
        }
        self.tracks.retain(|t| t.status != TrackStatus::Deleted);

        let mut out: Vec<TrackRecord> = self
            .tracks
            .iter()
            .filter(|t| t.status == TrackStatus::Confirmed && t.time_since_update == 0)
            .map(|t| {
                let &(_, raw, conf) = t.history.last().expect("updated track has history");
                let bbox = if self.config.output_raw_boxes {
                    raw
                } else {
                    BBox::from_xyah(t.kalman.measurement())
                };
                TrackRecord::new(frame, t.id, bbox, conf)
            })
            .collect();
        out.sort_by_key(|r| r.id);
        Ok(out)
    }

    fn associate(&mut self, detections: &[Detection]) -> Result<AssignmentResult> {
        let all_dets: Vec<usize> = (0..detections.len()).collect();
        // Tentative tracks are left to the IoU stage when it is enabled.
        let primary: Vec<usize> = (0..self.tracks.len())
            .filter(|&i| !self.config.iou_stage || self.tracks[i].status == TrackStatus::Confirmed)
            .collect();
        let secondary: Vec<usize> = (0..self.tracks.len())
            .filter(|i| !primary.contains(i))
            .collect();

        let cost = self.primary_cost(&primary, detections)?;
        let local = if self.config.cascade {
            self.stages.insert(Stage::MatchingCascade);
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut ages: Vec<u32> = primary
                .iter()
                .map(|&i| self.tracks[i].time_since_update)
                .collect();
            ages.sort_unstable();
            ages.dedup();
            for age in ages {
                groups.push(
                    (0..primary.len())
                        .filter(|&k| self.tracks[primary[k]].time_since_update == age)
                        .collect(),
                );
            }
            matching_cascade(&groups, &cost, self.config.max_cost)?
        } else {
            self.stages.insert(Stage::GlobalAssignment);
            let rows: Vec<usize> = (0..primary.len()).collect();
            solve_subset(&cost, &rows, &all_dets, self.config.max_cost)
        };
        let mut result = AssignmentResult {
            matches: local.matches.iter().map(|&(r, c)| (primary[r], c)).collect(),
            unmatched_tracks: local.unmatched_tracks.iter().map(|&r| primary[r]).collect(),
            unmatched_detections: local.unmatched_detections,
        };

        if self.config.iou_stage {
            let mut candidates = secondary;
            let mut still_unmatched = Vec::new();
            for &t in &result.unmatched_tracks {
                if self.tracks[t].time_since_update == 1 {
                    candidates.push(t);
                } else {
                    still_unmatched.push(t);
                }
            }
            candidates.sort_unstable();
            if !candidates.is_empty() && !result.unmatched_detections.is_empty() {
                self.stages.insert(Stage::IouAssignment);
            }
            let boxes: Vec<BBox> = candidates.iter().map(|&t| self.tracks[t].predicted_box()).collect();
            let det_boxes: Vec<BBox> = detections.iter().map(|d| d.bbox).collect();
            let iou = iou_cost(&boxes, &det_boxes);
            let rows: Vec<usize> = (0..candidates.len()).collect();
            let step = solve_subset(&iou, &rows, &result.unmatched_detections, IOU_MAX_COST);
            result
                .matches
                .extend(step.matches.iter().map(|&(r, c)| (candidates[r], c)));
            still_unmatched.extend(step.unmatched_tracks.iter().map(|&r| candidates[r]));
            still_unmatched.sort_unstable();
            result.unmatched_tracks = still_unmatched;
            result.unmatched_detections = step.unmatched_detections;
        }
        result.matches.sort_unstable();
        Ok(result)
    }

    fn primary_cost(&mut self, rows: &[usize], detections: &[Detection]) -> Result<CostMatrix> {
        let measurements: Vec<[f64; 4]> = detections.iter().map(|d| d.bbox.to_xyah()).collect();
        let mut gating = DMatrix::zeros(rows.len(), detections.len());
        if !rows.is_empty() && !detections.is_empty() {
            self.stages.insert(Stage::GatingDistance);
        }
        for (r, &ti) in rows.iter().enumerate() {
            let d = self.tracks[ti]
                .kalman
                .gating_distance(&measurements, &self.noise)?;
            for (c, v) in d.into_iter().enumerate() {
                gating[(r, c)] = v;
            }
        }
        let lambda = if !self.config.appearance {
            self.stages.insert(Stage::MotionCost);
            0.0
        } else if self.config.mc {
            self.stages.insert(Stage::MotionCost);
            self.config.lambda
        } else {
            1.0
        };
        let appearance = if self.config.appearance {
            self.stages.insert(Stage::AppearanceCost);
            let states: Vec<&AppearanceState> =
                rows.iter().map(|&i| &self.tracks[i].appearance).collect();
            appearance_cost_matrix(&states, detections)?
        } else {
            DMatrix::zeros(rows.len(), detections.len())
        };
        blend_costs(&appearance, &gating, lambda, self.config.gate_threshold)
    }

    fn update_track(&mut self, index: usize, frame: u32, det: &Detection) -> Result<()> {
        self.stages.insert(if self.config.nsa {
            Stage::AdaptiveNoiseUpdate
        } else {
            Stage::FixedNoiseUpdate
        });
        let n_init = self.config.n_init;
        let t = &mut self.tracks[index];
        t.kalman = t
            .kalman
            .update(det.bbox.to_xyah(), det.confidence, &self.noise)?;
        if self.config.appearance {
            if let Some(e) = &det.embedding {
                t.appearance.observe(e)?;
                self.stages.insert(if self.config.ema {
                    Stage::EmaUpdate
                } else {
                    Stage::BankUpdate
                });
            }
        }
        t.hits += 1;
        t.time_since_update = 0;
        t.history.push((frame, det.bbox, det.confidence));
        if t.status == TrackStatus::Tentative && t.hits >= n_init {
            t.status = TrackStatus::Confirmed;
        }
        Ok(())
    }

    fn spawn(&mut self, frame: u32, det: &Detection) -> Result<()> {
        let kalman = initiate(det.bbox.to_xyah())?;
        let mut appearance = self.config.new_appearance();
        if self.config.appearance {
            if let Some(e) = &det.embedding {
                appearance.observe(e)?;
            }
        }
        let status = if self.config.n_init <= 1 {
            TrackStatus::Confirmed
        } else {
            TrackStatus::Tentative
        };
        self.tracks.push(Track {
            id: self.next_id,
            kalman,
            appearance,
            status,
            hits: 1,
            time_since_update: 0,
            history: vec![(frame, det.bbox, det.confidence)],
        });
        self.next_id += 1;
        Ok(())
    }
}

/// Everything needed to track one sequence.
#[derive(Debug, Clone, Default)]
pub struct SequenceBundle {
    pub detections: DetectionSet,
    pub warps: WarpMap,
    /// Sequence length; defaults to the last frame holding a detection row.
    pub num_frames: Option<u32>,
}

impl SequenceBundle {
    pub fn new(detections: DetectionSet) -> Self {
        Self {
            detections,
            ..Self::default()
        }
    }

    pub fn with_warps(mut self, warps: WarpMap) -> Self {
        self.warps = warps;
        self
    }
}

/// Tracks a whole sequence and returns all emitted records sorted by
/// `(frame, id)`.
pub fn run_sequence(bundle: &SequenceBundle, config: &TrackerConfig) -> Result<Vec<TrackRecord>> {
    let mut tracker = Tracker::new(config.clone())?;
    let frames = bundle
        .num_frames
        .unwrap_or_else(|| bundle.detections.num_frames());
    let mut out = Vec::new();
    for frame in 1..=frames {
        let warp = bundle.warps.get(frame);
        out.extend(tracker.step(frame, bundle.detections.frame(frame), &warp)?);
    }
    out.sort_by_key(|r| (r.frame, r.id));
    Ok(out)
}
