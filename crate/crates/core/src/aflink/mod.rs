//! Appearance-free tracklet linking: a small two-branch temporal network
//! that scores whether two tracklets belong to one identity, its training
//! loop, and the offline global-link pass.

mod link;
mod network;
mod pairs;
mod scalar;
mod train;
mod weights;
mod window;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::mot_io::TrackRecord;

pub use link::{apply_links, global_link, link_candidates, plan_links, LinkCandidate, LinkReport, LinkThresholds};
pub use network::{accumulate_gradients, backward, batch_loss, forward, forward_batch};
pub use pairs::{generate_training_pairs, LabeledPair, MIN_SEGMENT_LEN};
pub use scalar::Scalar;
pub use train::{accuracy, train, TrainConfig, TrainReport};
pub use weights::{
    expected_shapes, tensor_names, AflinkWeights, Tensor, BRANCH_TENSORS, CLASSES, FEATURE_DIM,
    FUSION_KERNEL, HIDDEN_DIM, TEMPORAL_CHANNELS, TEMPORAL_KERNEL, TEMPORAL_PADDING, TENSOR_COUNT,
};
pub use window::{PairInput, Padding, TrackletWindow, FRAME_SCALE, POSITION_SCALE, WINDOW_LEN};

/// One identity's `(frame, cx, cy)` rows, sorted by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: u32,
    pub points: Vec<[f64; 3]>,
}

impl Tracklet {
    pub fn first_frame(&self) -> f64 {
        self.points[0][0]
    }

    pub fn last_frame(&self) -> f64 {
        self.points[self.points.len() - 1][0]
    }
}

/// Groups records by id into tracklets ordered by id. Two rows with the same
/// id and frame are a validation error.
pub fn tracklets_from_records(records: &[TrackRecord]) -> Result<Vec<Tracklet>> {
    let mut by_id: BTreeMap<u32, Vec<[f64; 3]>> = BTreeMap::new();
    for r in records {
        let (cx, cy) = r.bbox.center();
        by_id.entry(r.id).or_default().push([f64::from(r.frame), cx, cy]);
    }
    by_id
        .into_iter()
        .map(|(id, mut points)| {
            points.sort_by(|a, b| a[0].total_cmp(&b[0]));
            if let Some(w) = points.windows(2).find(|w| w[0][0] == w[1][0]) {
                return Err(Error::Validation(format!(
                    "id {id} appears twice in frame {}",
                    w[0][0]
                )));
            }
            Ok(Tracklet { id, points })
        })
        .collect()
}
