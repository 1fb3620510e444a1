use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use proptest::prelude::*;
use strongtrack::aflink::{global_link, AflinkWeights, LinkThresholds};
use strongtrack::association::{blend_costs, solve_assignment, CostMatrix};
use strongtrack::evalkit::evaluate;
use strongtrack::mot_io::{format_tracks, read_tracks, TrackRecord};
use strongtrack::motion::{initiate, MeasurementNoiseModel};
use strongtrack::BBox;

fn bbox() -> impl Strategy<Value = BBox> {
    (-100.0..1500.0f64, -100.0..900.0f64, 1.0..200.0f64, 1.0..400.0f64)
        .prop_map(|(l, t, w, h)| BBox::new(l, t, w, h))
}

fn records() -> impl Strategy<Value = Vec<TrackRecord>> {
    prop::collection::btree_map((1u32..60, 1u32..8), (bbox(), 0.0..1.0f64), 0..80).prop_map(|m| {
        m.into_iter()
            .map(|((frame, id), (b, c))| TrackRecord::new(frame, id, b, c))
            .collect()
    })
}

fn min_eigenvalue(m: &nalgebra::SMatrix<f64, 8, 8>) -> f64 {
    m.symmetric_eigen().eigenvalues.min()
}

proptest! {
    #[test]
    fn track_text_round_trips_within_a_hundredth(recs in records()) {
        let text = format_tracks(&recs).unwrap();
        let back = read_tracks(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back.len(), recs.len());
        for (a, b) in recs.iter().zip(&back) {
            prop_assert_eq!((a.frame, a.id), (b.frame, b.id));
            for (x, y) in [(a.bbox.left, b.bbox.left), (a.bbox.top, b.bbox.top), (a.bbox.width, b.bbox.width), (a.bbox.height, b.bbox.height)] {
                prop_assert!((x - y).abs() <= 0.005 + 1e-9);
            }
        }
    }

    #[test]
    fn covariance_stays_positive_semidefinite(
        start in bbox(),
        steps in prop::collection::vec((bbox(), 0.0..=1.0f64, any::<bool>()), 1..40),
        nsa in any::<bool>(),
    ) {
        let noise = MeasurementNoiseModel { nsa_enabled: nsa, ..MeasurementNoiseModel::default() };
        let mut state = initiate(start.to_xyah()).unwrap();
        for (b, c, observe) in steps {
            state = state.predict();
            if observe {
                state = state.update(b.to_xyah(), c, &noise).unwrap();
            }
            let sym = (state.covariance - state.covariance.transpose()).abs().max();
            prop_assert!(sym < 1e-9 * state.covariance.abs().max().max(1.0));
            prop_assert!(min_eigenvalue(&state.covariance) > -1e-9 * state.covariance.abs().max().max(1.0));
        }
    }

    #[test]
    fn assignment_is_a_valid_partial_matching(
        n in 0usize..7,
        m in 0usize..7,
        seed in prop::collection::vec(0.0..1.0f64, 49),
        gate in prop::collection::vec(0.0..20.0f64, 49),
        max_cost in 0.05..1.0f64,
    ) {
        let a = DMatrix::from_fn(n, m, |i, j| seed[i * 7 + j]);
        let g = DMatrix::from_fn(n, m, |i, j| gate[i * 7 + j]);
        let cost = blend_costs(&a, &g, 0.98, 9.4877).unwrap();
        let r = solve_assignment(&cost, max_cost);
        let rows: BTreeSet<usize> = r.matches.iter().map(|m| m.0).chain(r.unmatched_tracks.iter().copied()).collect();
        let cols: BTreeSet<usize> = r.matches.iter().map(|m| m.1).chain(r.unmatched_detections.iter().copied()).collect();
        prop_assert_eq!(rows.len(), n);
        prop_assert_eq!(r.matches.len() + r.unmatched_tracks.len(), n);
        prop_assert_eq!(cols.len(), m);
        prop_assert_eq!(r.matches.len() + r.unmatched_detections.len(), m);
        for &(i, j) in &r.matches {
            prop_assert!(cost.is_feasible(i, j));
            prop_assert!(cost.values[(i, j)] <= max_cost);
        }
    }

    #[test]
    fn constant_shift_keeps_the_match_set(
        n in 1usize..6,
        m in 1usize..6,
        vals in prop::collection::vec(0.0..1.0f64, 36),
        shift in -0.5..0.5f64,
    ) {
        let base = DMatrix::from_fn(n, m, |i, j| vals[i * 6 + j]);
        let a = solve_assignment(&CostMatrix::new(base.clone()), 10.0);
        let b = solve_assignment(&CostMatrix::new(base.map(|v| v + shift)), 10.0);
        prop_assert_eq!(a.matches, b.matches);
    }

    #[test]
    fn metrics_ignore_how_predictions_are_numbered(recs in records(), offset in 1u32..1000) {
        let relabelled: Vec<TrackRecord> = recs
            .iter()
            .map(|r| TrackRecord { id: 1000 - r.id + offset, ..r.clone() })
            .collect();
        let mut sorted = relabelled.clone();
        sorted.sort_by_key(|r| (r.frame, r.id));
        let a = evaluate(&recs, &recs, 0.5).unwrap();
        let b = evaluate(&recs, &sorted, 0.5).unwrap();
        prop_assert_eq!(a.ids, b.ids);
        prop_assert_eq!(a.fp, b.fp);
        prop_assert_eq!(a.fn_, b.fn_);
        prop_assert!((a.idf1() - b.idf1()).abs() < 1e-12);
        prop_assert!((a.mota() - b.mota()).abs() < 1e-12);
    }
}

/// Fragments of a few walkers, cut at random frames and renumbered.
fn fragments() -> impl Strategy<Value = Vec<TrackRecord>> {
    prop::collection::vec((1u32..4, prop::collection::vec(5u32..40, 1..4)), 1..5).prop_map(|walkers| {
        let mut out = Vec::new();
        let mut next_id = 1;
        for (w, (speed, pieces)) in walkers.into_iter().enumerate() {
            let mut frame = 1;
            for len in pieces {
                for f in frame..frame + len {
                    let x = 60.0 * w as f64 + speed as f64 * f as f64;
                    out.push(TrackRecord::new(f, next_id, BBox::new(x, 100.0 + 40.0 * w as f64, 30.0, 70.0), 1.0));
                }
                next_id += 1;
                frame += len + (len % 7);
            }
        }
        out.sort_by_key(|r| (r.frame, r.id));
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn linking_only_merges_and_never_overlaps(recs in fragments(), seed in 0u64..4) {
        let weights = AflinkWeights::<f32>::init(seed);
        let thresholds = LinkThresholds { min_score: 0.0, ..LinkThresholds::default() };
        let out = global_link(&recs, &weights, &thresholds).unwrap();
        prop_assert_eq!(out.len(), recs.len());
        let before: BTreeSet<u32> = recs.iter().map(|r| r.id).collect();
        let after: BTreeSet<u32> = out.iter().map(|r| r.id).collect();
        prop_assert!(after.len() <= before.len());
        prop_assert!(after.is_subset(&before));
        let mut keys: Vec<(u32, u32)> = out.iter().map(|r| (r.frame, r.id)).collect();
        let n = keys.len();
        keys.dedup();
        prop_assert_eq!(keys.len(), n, "two rows share a frame and id after linking");

        let strict = LinkThresholds { min_score: 1.5, ..LinkThresholds::default() };
        prop_assert_eq!(global_link(&recs, &weights, &strict).unwrap(), recs.clone());
    }
}
