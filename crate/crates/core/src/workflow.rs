//! File-to-file stages shared by the command-line tool and the examples.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::aflink::{self, AflinkWeights, LabeledPair, TrainConfig, TrainReport};
use crate::config::Settings;
use crate::error::{Error, Result};
use crate::interpolation::interpolate_records;
use crate::manifest::{manifest_path, RunManifest};
use crate::mot_io::{parse_detections, parse_embeddings, parse_tracks, parse_warps, write_tracks, TrackRecord};
use crate::tracker::{run_sequence, SequenceBundle};

/// Input files of one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFiles {
    pub detections: PathBuf,
    pub embeddings: Option<PathBuf>,
    pub warps: Option<PathBuf>,
}

/// Tracks one sequence, writes the result to `out` and a manifest next to
/// it. Without an embedding file appearance matching is switched off.
pub fn track_file(files: &SequenceFiles, settings: &Settings, out: &Path) -> Result<RunManifest> {
    let mut settings = settings.clone();
    if files.embeddings.is_none() && settings.get("appearance") == "true" {
        settings.set_derived("appearance", false)?;
    }
    let warps_path = files.warps.clone().or_else(|| settings.warp_file());
    let config = settings.tracker_config()?;
    let mut manifest = RunManifest::new("track", settings);

    let started = Instant::now();
    let mut detections = parse_detections(&files.detections, config.min_confidence)?;
    manifest.add_input("detections", &files.detections)?;
    if let Some(p) = &files.embeddings {
        parse_embeddings(p, &mut detections, config.appearance)?;
        manifest.add_input("embeddings", p)?;
    }
    let warps = parse_warps(warps_path.as_deref())?;
    if let Some(p) = &warps_path {
        manifest.add_input("warps", p)?;
    }
    manifest.time("load", detections.len(), started.elapsed());

    let started = Instant::now();
    let bundle = SequenceBundle::new(detections).with_warps(warps);
    let records = run_sequence(&bundle, &config)?;
    manifest.time("track", bundle.detections.num_frames() as usize, started.elapsed());
    manifest.note("records", records.len());

    write_tracks(out, &records)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.write(&manifest_path(out))?;
    Ok(manifest)
}

/// What [`refine_records`] did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RefineSummary {
    pub links: usize,
    pub ids_before: usize,
    pub ids_after: usize,
    pub interpolated_rows: usize,
}

fn distinct_ids(records: &[TrackRecord]) -> usize {
    let mut ids: Vec<u32> = records.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}

/// Global linking (when weights are given) followed by gap filling. The
/// order is fixed: linking first so that interpolation can bridge the gaps
/// it closes.
pub fn refine_records(
    records: &[TrackRecord],
    weights: Option<&AflinkWeights<f32>>,
    settings: &Settings,
    manifest: Option<&mut RunManifest>,
) -> Result<(Vec<TrackRecord>, RefineSummary)> {
    let mode = settings.interp_mode();
    let gsi = settings.gsi_config()?;
    let mut summary = RefineSummary {
        ids_before: distinct_ids(records),
        ..RefineSummary::default()
    };
    let mut timings = Vec::new();
    let linked = match weights {
        Some(w) => {
            let started = Instant::now();
            let report = aflink::plan_links(records, w, &settings.link_thresholds()?)?;
            let linked = aflink::apply_links(records, &report);
            timings.push(("aflink", report.candidates.len(), started.elapsed()));
            summary.links = report.links.len();
            linked
        }
        None => {
            let mut v = records.to_vec();
            v.sort_by_key(|r| (r.frame, r.id));
            v
        }
    };
    let started = Instant::now();
    let out = interpolate_records(&linked, mode, &gsi)?;
    timings.push(("interpolate", distinct_ids(&linked), started.elapsed()));
    summary.ids_after = distinct_ids(&out);
    summary.interpolated_rows = out.iter().filter(|r| r.interpolated).count();
    if let Some(m) = manifest {
        for (stage, n, t) in timings {
            m.time(stage, n, t);
        }
        m.note("aflink_ran", weights.is_some());
        m.note("interp_ran", mode);
        m.note("links", summary.links);
        m.note("interpolated_rows", summary.interpolated_rows);
    }
    Ok((out, summary))
}

/// Refines a MOT result file from any tracker.
pub fn refine_file(input: &Path, settings: &Settings, out: &Path) -> Result<(RunManifest, RefineSummary)> {
    let mut manifest = RunManifest::new("refine", settings.clone());
    let records = parse_tracks(input)?;
    manifest.add_input("results", input)?;
    let weights = match settings.aflink_weights() {
        Some(p) => {
            let w = AflinkWeights::<f32>::load(&p)?;
            manifest.add_input("aflink_weights", &p)?;
            Some(w)
        }
        None => None,
    };
    let (refined, summary) = refine_records(&records, weights.as_ref(), settings, Some(&mut manifest))?;
    write_tracks(out, &refined)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.write(&manifest_path(out))?;
    Ok((manifest, summary))
}

/// Pairs from several ground-truth files; the per-file count is split evenly
/// and each file gets its own derived seed.
pub fn pairs_from_files(gt: &[PathBuf], count: usize, seed: u64) -> Result<Vec<LabeledPair>> {
    if gt.is_empty() {
        return Err(Error::Data("no ground-truth files given".into()));
    }
    let mut pairs = Vec::with_capacity(count);
    for (i, path) in gt.iter().enumerate() {
        let share = count / gt.len() + usize::from(i < count % gt.len());
        let records = parse_tracks(path)?;
        pairs.extend(aflink::generate_training_pairs(&records, share, seed.wrapping_add(i as u64))?);
    }
    Ok(pairs)
}

/// Generates pairs from ground truth, trains, and saves the weights.
pub fn train_link_files(
    gt: &[PathBuf],
    count: usize,
    config: &TrainConfig,
    out: &Path,
) -> Result<(RunManifest, TrainReport)> {
    let mut settings = Settings::default();
    settings.set_flag("seed", config.seed)?;
    let mut manifest = RunManifest::new("train-link", settings);
    for (i, p) in gt.iter().enumerate() {
        manifest.add_input(&format!("gt{i}"), p)?;
    }
    let started = Instant::now();
    let pairs = pairs_from_files(gt, count, config.seed)?;
    manifest.time("pairs", pairs.len(), started.elapsed());
    let (weights, report) = aflink::train(&pairs, config)?;
    manifest.time("train", pairs.len() * config.epochs, report.elapsed);
    manifest.note("epochs", config.epochs);
    manifest.note("batch_size", config.batch_size);
    manifest.note("final_loss", format!("{:.6}", report.epoch_losses.last().copied().unwrap_or(f64::NAN)));
    manifest.note("train_accuracy", format!("{:.4}", aflink::accuracy(&weights, &pairs)?));
    weights.save(out)?;
    manifest.outputs.push(out.to_path_buf());
    manifest.write(&manifest_path(out))?;
    Ok((manifest, report))
}
