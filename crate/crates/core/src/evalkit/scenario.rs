//! Seeded synthetic scenes: ground truth, degraded detections with
//! identity-bearing embeddings, and optional camera pan.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::mot_io::{
    encode_embeddings, format_detections, format_tracks, format_warps, parse_key_values, write_bytes, Detection,
    DetectionSet, EmbeddingFile, EmbeddingRecord, TrackRecord, WarpMap, WarpMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionKind {
    ConstantVelocity,
    Sinusoidal,
}

impl FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" | "constant-velocity" => Ok(Self::ConstantVelocity),
            "sinusoidal" => Ok(Self::Sinusoidal),
            other => Err(Error::Spec(format!("unknown motion model `{other}`"))),
        }
    }
}

impl std::fmt::Display for MotionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ConstantVelocity => "constant-velocity",
            Self::Sinusoidal => "sinusoidal",
        })
    }
}

/// Identity `id` produces no detections in frames `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Occlusion {
    pub id: u32,
    pub start: u32,
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub num_identities: u32,
    pub num_frames: u32,
    pub arena_width: f64,
    pub arena_height: f64,
    pub motion: MotionKind,
    /// Pixels per frame.
    pub speed_min: f64,
    pub speed_max: f64,
    pub sine_amplitude: f64,
    pub sine_period: f64,
    pub box_width_min: f64,
    pub box_width_max: f64,
    /// Width over height.
    pub box_aspect: f64,
    pub miss_prob: f64,
    /// Standard deviation of box-coordinate noise, in pixels.
    pub box_noise: f64,
    /// Expected false positives per frame.
    pub fp_rate: f64,
    pub conf_min: f64,
    pub conf_max: f64,
    pub fp_conf_min: f64,
    pub fp_conf_max: f64,
    /// Scale each true detection's box noise by how unconfident it is, so
    /// that confidence carries information about localisation quality.
    pub noise_follows_confidence: bool,
    pub embedding_dim: u32,
    /// Expected norm of the noise added to the unit identity anchor.
    pub embedding_noise: f64,
    /// Expected cosine similarity between two identities' anchors.
    pub anchor_similarity: f64,
    /// How strongly a partly hidden detection's embedding takes on the
    /// appearance of the box in front of it, scaled by the hidden fraction.
    pub appearance_mixing: f64,
    pub occlusions: Vec<Occlusion>,
    /// Camera translation per frame; the scene drifts by the opposite amount.
    pub pan_x: f64,
    pub pan_y: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            num_identities: 10,
            num_frames: 200,
            arena_width: 1280.0,
            arena_height: 720.0,
            motion: MotionKind::ConstantVelocity,
            speed_min: 1.0,
            speed_max: 4.0,
            sine_amplitude: 20.0,
            sine_period: 60.0,
            box_width_min: 30.0,
            box_width_max: 60.0,
            box_aspect: 0.4,
            miss_prob: 0.05,
            box_noise: 2.0,
            fp_rate: 0.5,
            conf_min: 0.5,
            conf_max: 1.0,
            fp_conf_min: 0.3,
            fp_conf_max: 0.7,
            noise_follows_confidence: true,
            embedding_dim: 32,
            embedding_noise: 0.3,
            anchor_similarity: 0.0,
            appearance_mixing: 0.5,
            occlusions: Vec::new(),
            pan_x: 0.0,
            pan_y: 0.0,
            seed: 0,
        }
    }
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Spec(format!("{name} must lie in [0, 1], got {v}")))
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Spec(format!("line {line}: invalid value `{value}` for `{key}`")))
}

fn parse_occlusion(value: &str, line: usize) -> Result<Occlusion> {
    let bad = || Error::Spec(format!("line {line}: occlusion must look like `id:start-end`, got `{value}`"));
    let (id, range) = value.split_once(':').ok_or_else(bad)?;
    let (start, end) = range.split_once('-').ok_or_else(bad)?;
    Ok(Occlusion {
        id: id.trim().parse().map_err(|_| bad())?,
        start: start.trim().parse().map_err(|_| bad())?,
        end: end.trim().parse().map_err(|_| bad())?,
    })
}

impl ScenarioSpec {
    /// Ten walkers in a 640x480 arena with frequent detector misses, each
    /// hidden once for 5 to 30 frames. Occlusion windows derive from `seed`.
    pub fn crossing(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xab1a7e);
        let num_frames = 300;
        let occlusions = (1..=10)
            .map(|id| {
                let start = rng.random_range(20..num_frames - 40);
                Occlusion {
                    id,
                    start,
                    end: start + rng.random_range(5..=30),
                }
            })
            .collect();
        Self {
            num_identities: 10,
            num_frames,
            arena_width: 640.0,
            arena_height: 480.0,
            speed_min: 2.0,
            speed_max: 5.0,
            box_noise: 3.0,
            miss_prob: 0.4,
            fp_rate: 1.0,
            anchor_similarity: 0.5,
            appearance_mixing: 0.3,
            occlusions,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_frames == 0 {
            return Err(Error::Spec("num_frames must be at least 1".into()));
        }
        if self.num_identities == 0 && !self.occlusions.is_empty() {
            return Err(Error::Spec("occlusions declared for a scene without identities".into()));
        }
        for o in &self.occlusions {
            if o.id == 0 || o.id > self.num_identities || o.start > o.end {
                return Err(Error::Spec(format!(
                    "occlusion {}:{}-{} does not name an identity and a frame interval",
                    o.id, o.start, o.end
                )));
            }
        }
        unit_interval("miss_prob", self.miss_prob)?;
        unit_interval("conf_min", self.conf_min)?;
        unit_interval("conf_max", self.conf_max)?;
        unit_interval("fp_conf_min", self.fp_conf_min)?;
        unit_interval("fp_conf_max", self.fp_conf_max)?;
        unit_interval("appearance_mixing", self.appearance_mixing)?;
        if !(0.0..1.0).contains(&self.anchor_similarity) {
            return Err(Error::Spec(format!(
                "anchor_similarity must lie in [0, 1), got {}",
                self.anchor_similarity
            )));
        }
        let positive = [
            ("arena_width", self.arena_width),
            ("arena_height", self.arena_height),
            ("box_width_min", self.box_width_min),
            ("box_aspect", self.box_aspect),
            ("sine_period", self.sine_period),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("speed_min", self.speed_min),
            ("box_noise", self.box_noise),
            ("fp_rate", self.fp_rate),
            ("embedding_noise", self.embedding_noise),
            ("sine_amplitude", self.sine_amplitude),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Spec(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.speed_max < self.speed_min
            || self.box_width_max < self.box_width_min
            || self.conf_max < self.conf_min
            || self.fp_conf_max < self.fp_conf_min
        {
            return Err(Error::Spec("every *_min must not exceed its *_max".into()));
        }
        let tallest = self.box_width_max / self.box_aspect;
        if self.box_width_max >= self.arena_width || tallest >= self.arena_height {
            return Err(Error::Spec("boxes do not fit inside the arena".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Spec("embedding_dim must be at least 1".into()));
        }
        if !(self.pan_x.is_finite() && self.pan_y.is_finite()) {
            return Err(Error::Spec("camera pan must be finite".into()));
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `occlusion = id:start-end`
    /// may repeat.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut spec = Self::default();
        for kv in parse_key_values(text, path)? {
            let (k, v, line) = (kv.key.as_str(), kv.value.as_str(), kv.line);
            match k {
                "num_identities" => spec.num_identities = parse_value(k, v, line)?,
                "num_frames" => spec.num_frames = parse_value(k, v, line)?,
                "arena_width" => spec.arena_width = parse_value(k, v, line)?,
                "arena_height" => spec.arena_height = parse_value(k, v, line)?,
                "motion" => spec.motion = v.parse()?,
                "speed_min" => spec.speed_min = parse_value(k, v, line)?,
                "speed_max" => spec.speed_max = parse_value(k, v, line)?,
                "sine_amplitude" => spec.sine_amplitude = parse_value(k, v, line)?,
                "sine_period" => spec.sine_period = parse_value(k, v, line)?,
                "box_width_min" => spec.box_width_min = parse_value(k, v, line)?,
                "box_width_max" => spec.box_width_max = parse_value(k, v, line)?,
                "box_aspect" => spec.box_aspect = parse_value(k, v, line)?,
                "miss_prob" => spec.miss_prob = parse_value(k, v, line)?,
                "box_noise" => spec.box_noise = parse_value(k, v, line)?,
                "fp_rate" => spec.fp_rate = parse_value(k, v, line)?,
                "conf_min" => spec.conf_min = parse_value(k, v, line)?,
                "conf_max" => spec.conf_max = parse_value(k, v, line)?,
                "fp_conf_min" => spec.fp_conf_min = parse_value(k, v, line)?,
                "fp_conf_max" => spec.fp_conf_max = parse_value(k, v, line)?,
                "noise_follows_confidence" => spec.noise_follows_confidence = parse_value(k, v, line)?,
                "embedding_dim" => spec.embedding_dim = parse_value(k, v, line)?,
                "embedding_noise" => spec.embedding_noise = parse_value(k, v, line)?,
                "anchor_similarity" => spec.anchor_similarity = parse_value(k, v, line)?,
                "appearance_mixing" => spec.appearance_mixing = parse_value(k, v, line)?,
                "occlusion" => spec.occlusions.push(parse_occlusion(v, line)?),
                "pan_x" => spec.pan_x = parse_value(k, v, line)?,
                "pan_y" => spec.pan_y = parse_value(k, v, line)?,
                "seed" => spec.seed = parse_value(k, v, line)?,
                other => {
                    return Err(Error::Spec(format!("line {line}: unknown scenario key `{other}`")));
                }
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }

    /// Inverse of [`ScenarioSpec::parse`].
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "num_identities = {}", self.num_identities);
        let _ = writeln!(s, "num_frames = {}", self.num_frames);
        let _ = writeln!(s, "arena_width = {}", self.arena_width);
        let _ = writeln!(s, "arena_height = {}", self.arena_height);
        let _ = writeln!(s, "motion = {}", self.motion);
        let _ = writeln!(s, "speed_min = {}", self.speed_min);
        let _ = writeln!(s, "speed_max = {}", self.speed_max);
        let _ = writeln!(s, "sine_amplitude = {}", self.sine_amplitude);
        let _ = writeln!(s, "sine_period = {}", self.sine_period);
        let _ = writeln!(s, "box_width_min = {}", self.box_width_min);
        let _ = writeln!(s, "box_width_max = {}", self.box_width_max);
        let _ = writeln!(s, "box_aspect = {}", self.box_aspect);
        let _ = writeln!(s, "miss_prob = {}", self.miss_prob);
        let _ = writeln!(s, "box_noise = {}", self.box_noise);
        let _ = writeln!(s, "fp_rate = {}", self.fp_rate);
        let _ = writeln!(s, "conf_min = {}", self.conf_min);
        let _ = writeln!(s, "conf_max = {}", self.conf_max);
        let _ = writeln!(s, "fp_conf_min = {}", self.fp_conf_min);
        let _ = writeln!(s, "fp_conf_max = {}", self.fp_conf_max);
        let _ = writeln!(s, "noise_follows_confidence = {}", self.noise_follows_confidence);
        let _ = writeln!(s, "embedding_dim = {}", self.embedding_dim);
        let _ = writeln!(s, "embedding_noise = {}", self.embedding_noise);
        let _ = writeln!(s, "anchor_similarity = {}", self.anchor_similarity);
        let _ = writeln!(s, "appearance_mixing = {}", self.appearance_mixing);
        for o in &self.occlusions {
            let _ = writeln!(s, "occlusion = {}:{}-{}", o.id, o.start, o.end);
        }
        let _ = writeln!(s, "pan_x = {}", self.pan_x);
        let _ = writeln!(s, "pan_y = {}", self.pan_y);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub gt: Vec<TrackRecord>,
    /// Detections with embeddings attached.
    pub detections: DetectionSet,
    pub embeddings: EmbeddingFile,
    /// Per-frame camera motion; empty without pan.
    pub warps: WarpMap,
}

/// Paths written by [`Scenario::write_to`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFiles {
    pub gt: PathBuf,
    pub detections: PathBuf,
    pub embeddings: PathBuf,
    pub warps: Option<PathBuf>,
}

impl Scenario {
    /// Writes `gt.txt`, `det.txt`, `det.emb` and, with camera motion,
    /// `warps.txt` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<ScenarioFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let files = ScenarioFiles {
            gt: dir.join("gt.txt"),
            detections: dir.join("det.txt"),
            embeddings: dir.join("det.emb"),
            warps: (!self.warps.is_empty()).then(|| dir.join("warps.txt")),
        };
        write_bytes(&files.gt, format_tracks(&self.gt)?.as_bytes())?;
        write_bytes(&files.detections, format_detections(&self.detections).as_bytes())?;
        write_bytes(&files.embeddings, &encode_embeddings(&self.embeddings)?)?;
        if let Some(p) = &files.warps {
            write_bytes(p, format_warps(&self.warps).as_bytes())?;
        }
        Ok(files)
    }
}

struct Walker {
    width: f64,
    height: f64,
    pos: [f64; 2],
    vel: [f64; 2],
    phase: f64,
    anchor: Vec<f64>,
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `normalize((1 - w) anchor + w other + noise)`.
fn noisy_embedding(rng: &mut ChaCha8Rng, anchor: &[f64], other: Option<(&[f64], f64)>, noise: f64) -> Vec<f32> {
    let per_component = noise / (anchor.len() as f64).sqrt();
    let v: Vec<f64> = anchor
        .iter()
        .enumerate()
        .map(|(k, &a)| {
            let base = match other {
                Some((o, w)) => (1.0 - w) * a + w * o[k],
                None => a,
            };
            base + per_component * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| (x / n) as f32).collect()
}

/// Share of `target`'s area covered by `cover`.
fn hidden_fraction(target: &BBox, cover: &BBox) -> f64 {
    let w = (target.right().min(cover.right()) - target.left.max(cover.left)).max(0.0);
    let h = (target.bottom().min(cover.bottom()) - target.top.max(cover.top)).max(0.0);
    w * h / target.area()
}

/// Builds a scene. The same spec, including its seed, always gives the same
/// scene.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let dim = spec.embedding_dim as usize;
    let (aw, ah) = (spec.arena_width, spec.arena_height);
    let shared = random_unit(&mut rng, dim);
    let (ws, wi) = (spec.anchor_similarity.sqrt(), (1.0 - spec.anchor_similarity).sqrt());

    let mut walkers: Vec<Walker> = (0..spec.num_identities)
        .map(|_| {
            let width = rng.random_range(spec.box_width_min..=spec.box_width_max);
            let height = width / spec.box_aspect;
            let pos = [
                rng.random_range(width / 2.0..=aw - width / 2.0),
                rng.random_range(height / 2.0..=ah - height / 2.0),
            ];
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let speed = rng.random_range(spec.speed_min..=spec.speed_max);
            Walker {
                width,
                height,
                pos,
                vel: [speed * theta.cos(), speed * theta.sin()],
                phase: rng.random_range(0.0..std::f64::consts::TAU),
                anchor: {
                    let own = random_unit(&mut rng, dim);
                    let v: Vec<f64> = own.iter().zip(&shared).map(|(o, c)| wi * o + ws * c).collect();
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.into_iter().map(|x| x / n).collect()
                },
            }
        })
        .collect();

    let mean_unconfidence = 1.0 - 0.5 * (spec.conf_min + spec.conf_max);
    let fp_count = (spec.fp_rate > 0.0).then(|| Poisson::new(spec.fp_rate).expect("positive rate"));
    let mut gt = Vec::new();
    let mut frames = Vec::with_capacity(spec.num_frames as usize);
    let mut warps = WarpMap::identity();
    let pan = spec.pan_x != 0.0 || spec.pan_y != 0.0;

    for frame in 1..=spec.num_frames {
        let offset = [spec.pan_x * f64::from(frame - 1), spec.pan_y * f64::from(frame - 1)];
        if pan && frame > 1 {
            warps.insert(WarpMatrix::translation(frame, -spec.pan_x, -spec.pan_y))?;
        }
        let mut boxes = Vec::with_capacity(walkers.len());
        for (k, w) in walkers.iter_mut().enumerate() {
            if frame > 1 {
                for axis in 0..2 {
                    let half = if axis == 0 { w.width / 2.0 } else { w.height / 2.0 };
                    let hi = if axis == 0 { aw } else { ah } - half;
                    let mut p = w.pos[axis] + w.vel[axis];
                    if p < half {
                        p = 2.0 * half - p;
                        w.vel[axis] = -w.vel[axis];
                    } else if p > hi {
                        p = 2.0 * hi - p;
                        w.vel[axis] = -w.vel[axis];
                    }
                    w.pos[axis] = p.clamp(half, hi);
                }
            }
            let mut center = w.pos;
            if spec.motion == MotionKind::Sinusoidal {
                let speed = w.vel[0].hypot(w.vel[1]);
                let normal = if speed > 0.0 { [-w.vel[1] / speed, w.vel[0] / speed] } else { [0.0, 1.0] };
                let s = spec.sine_amplitude
                    * (std::f64::consts::TAU * f64::from(frame) / spec.sine_period + w.phase).sin();
                center[0] = (center[0] + s * normal[0]).clamp(w.width / 2.0, aw - w.width / 2.0);
                center[1] = (center[1] + s * normal[1]).clamp(w.height / 2.0, ah - w.height / 2.0);
            }
            let bbox = BBox::new(
                center[0] - w.width / 2.0 - offset[0],
                center[1] - w.height / 2.0 - offset[1],
                w.width,
                w.height,
            );
            gt.push(TrackRecord::new(frame, k as u32 + 1, bbox, 1.0));
            boxes.push(bbox);
        }

        let mut dets = Vec::new();
        for (k, w) in walkers.iter().enumerate() {
            let id = k as u32 + 1;
            let bbox = boxes[k];
            let occluded = spec
                .occlusions
                .iter()
                .any(|o| o.id == id && (o.start..=o.end).contains(&frame));
            let missed = rng.random::<f64>() < spec.miss_prob;
            if occluded || missed {
                continue;
            }
            let conf = rng.random_range(spec.conf_min..=spec.conf_max);
            let std = if spec.noise_follows_confidence && mean_unconfidence > 1e-9 {
                spec.box_noise * (1.0 - conf) / mean_unconfidence
            } else {
                spec.box_noise
            };
            let noisy = if std > 0.0 {
                let n = Normal::new(0.0, std).expect("positive std");
                BBox::new(
                    bbox.left + n.sample(&mut rng),
                    bbox.top + n.sample(&mut rng),
                    (bbox.width + n.sample(&mut rng)).max(2.0),
                    (bbox.height + n.sample(&mut rng)).max(2.0),
                )
            } else {
                bbox
            };
            // The box whose bottom edge is lower stands nearer the camera.
            let front = (0..boxes.len())
                .filter(|&j| j != k && boxes[j].bottom() > bbox.bottom())
                .map(|j| (j, hidden_fraction(&bbox, &boxes[j])))
                .filter(|&(_, f)| f > 0.0)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            let other = front
                .filter(|_| spec.appearance_mixing > 0.0)
                .map(|(j, f)| (walkers[j].anchor.as_slice(), spec.appearance_mixing * f));
            let emb = noisy_embedding(&mut rng, &w.anchor, other, spec.embedding_noise);
            dets.push(Detection::new(frame, noisy, conf).with_embedding(emb));
        }
        let n_fp = fp_count.as_ref().map_or(0, |p| p.sample(&mut rng) as usize);
        for _ in 0..n_fp {
            let width = rng.random_range(spec.box_width_min..=spec.box_width_max);
            let height = width / spec.box_aspect;
            let bbox = BBox::new(
                rng.random_range(0.0..=aw - width) - offset[0],
                rng.random_range(0.0..=ah - height) - offset[1],
                width,
                height,
            );
            let conf = rng.random_range(spec.fp_conf_min..=spec.fp_conf_max);
            let emb = random_unit(&mut rng, dim).into_iter().map(|x| x as f32).collect();
            dets.push(Detection::new(frame, bbox, conf).with_embedding(emb));
        }
        dets.shuffle(&mut rng);
        frames.push(dets);
    }

    let detections = DetectionSet::from_frames(frames);
    let records = detections
        .iter()
        .flat_map(|(frame, dets)| {
            dets.iter().map(move |d| EmbeddingRecord {
                frame,
                index: d.source_index as u32,
                vector: d.embedding.clone().expect("every generated detection has one"),
            })
        })
        .collect();
    gt.sort_by_key(|r| (r.frame, r.id));
    Ok(Scenario {
        gt,
        detections,
        embeddings: EmbeddingFile {
            dim: spec.embedding_dim,
            records,
        },
        warps,
    })
}

/// One break inserted by [`inject_splits`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectedSplit {
    pub original: u32,
    pub fragment: u32,
    /// Frames removed between the two pieces.
    pub removed: u32,
}

/// Breaks up to `count` trajectories: rows in a random window of
/// `min_removed..=max_removed` frames are dropped and everything after it is
/// relabelled with a fresh id. Each piece keeps at least `min_piece` rows.
pub fn inject_splits(
    records: &[TrackRecord],
    count: usize,
    min_removed: u32,
    max_removed: u32,
    min_piece: usize,
    seed: u64,
) -> (Vec<TrackRecord>, Vec<InjectedSplit>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<u32> = records.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    ids.dedup();
    let mut next_id = ids.last().copied().unwrap_or(0) + 1;
    ids.shuffle(&mut rng);
    let mut out: Vec<TrackRecord> = records.to_vec();
    let mut splits = Vec::new();
    for id in ids {
        if splits.len() == count {
            break;
        }
        let mut frames: Vec<u32> = out.iter().filter(|r| r.id == id).map(|r| r.frame).collect();
        frames.sort_unstable();
        let removed = rng.random_range(min_removed..=max_removed);
        let usable = frames.len().saturating_sub(2 * min_piece + removed as usize);
        if usable == 0 {
            continue;
        }
        let cut_start = frames[min_piece + rng.random_range(0..usable)];
        let cut_end = cut_start + removed;
        out.retain(|r| r.id != id || r.frame < cut_start || r.frame >= cut_end);
        for r in &mut out {
            if r.id == id && r.frame >= cut_end {
                r.id = next_id;
            }
        }
        splits.push(InjectedSplit {
            original: id,
            fragment: next_id,
            removed,
        });
        next_id += 1;
    }
    out.sort_by_key(|r| (r.frame, r.id));
    (out, splits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean() -> ScenarioSpec {
        ScenarioSpec {
            appearance_mixing: 0.0,
            num_identities: 4,
            num_frames: 40,
            miss_prob: 0.0,
            box_noise: 0.0,
            fp_rate: 0.0,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn clean_detector_reproduces_ground_truth() {
        let s = generate_scenario(&clean()).unwrap();
        assert_eq!(s.detections.len(), s.gt.len());
        for (frame, dets) in s.detections.iter() {
            let mut a: Vec<_> = dets.iter().map(|d| d.bbox.to_xyah()).collect();
            let mut b: Vec<_> = s.gt.iter().filter(|r| r.frame == frame).map(|r| r.bbox.to_xyah()).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn same_seed_same_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let spec = ScenarioSpec {
            pan_x: 1.5,
            ..ScenarioSpec::default()
        };
        let a = generate_scenario(&spec).unwrap().write_to(&dir.path().join("a")).unwrap();
        let b = generate_scenario(&spec).unwrap().write_to(&dir.path().join("b")).unwrap();
        for (x, y) in [
            (&a.gt, &b.gt),
            (&a.detections, &b.detections),
            (&a.embeddings, &b.embeddings),
            (a.warps.as_ref().unwrap(), b.warps.as_ref().unwrap()),
        ] {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
    }

    #[test]
    fn occluded_identity_has_no_detections() {
        let mut spec = clean();
        spec.occlusions.push(Occlusion { id: 1, start: 10, end: 20 });
        let s = generate_scenario(&spec).unwrap();
        for f in 10..=20 {
            let g = s.gt.iter().find(|r| r.frame == f && r.id == 1).unwrap();
            assert!(s.detections.frame(f).iter().all(|d| d.bbox != g.bbox));
            assert_eq!(s.detections.frame(f).len(), 3);
        }
        assert_eq!(s.detections.frame(21).len(), 4);
    }

    #[test]
    fn occlusions_without_identities_are_rejected() {
        let spec = ScenarioSpec {
            num_identities: 0,
            occlusions: vec![Occlusion { id: 1, start: 1, end: 2 }],
            ..ScenarioSpec::default()
        };
        assert!(matches!(generate_scenario(&spec), Err(Error::Spec(_))));
        let bad = ScenarioSpec {
            miss_prob: 1.5,
            ..ScenarioSpec::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Spec(_))));
    }

    #[test]
    fn spec_text_round_trip() {
        let mut spec = ScenarioSpec {
            motion: MotionKind::Sinusoidal,
            anchor_similarity: 0.4,
            appearance_mixing: 0.25,
            seed: 77,
            pan_y: -0.5,
            ..ScenarioSpec::default()
        };
        spec.occlusions.push(Occlusion { id: 3, start: 5, end: 9 });
        let back = ScenarioSpec::parse(&spec.to_text(), Path::new("s.cfg")).unwrap();
        assert_eq!(back, spec);
        assert!(ScenarioSpec::parse("bogus = 1\n", Path::new("s.cfg")).is_err());
    }

    #[test]
    fn boxes_stay_in_arena_without_pan() {
        let spec = ScenarioSpec {
            motion: MotionKind::Sinusoidal,
            num_frames: 300,
            speed_max: 8.0,
            ..ScenarioSpec::default()
        };
        let s = generate_scenario(&spec).unwrap();
        for r in &s.gt {
            assert!(r.bbox.left >= -1e-9 && r.bbox.right() <= spec.arena_width + 1e-9);
            assert!(r.bbox.top >= -1e-9 && r.bbox.bottom() <= spec.arena_height + 1e-9);
        }
    }

    #[test]
    fn embeddings_cluster_by_identity() {
        let s = generate_scenario(&clean()).unwrap();
        let e1: Vec<&Vec<f32>> = s.detections.frame(1).iter().map(|d| d.embedding.as_ref().unwrap()).collect();
        let e2: Vec<&Vec<f32>> = s.detections.frame(2).iter().map(|d| d.embedding.as_ref().unwrap()).collect();
        // Each frame-1 vector has exactly one strongly similar partner in frame 2.
        for a in &e1 {
            let close = e2
                .iter()
                .filter(|b| a.iter().zip(b.iter()).map(|(x, y)| x * y).sum::<f32>() > 0.7)
                .count();
            assert_eq!(close, 1);
        }
    }

    #[test]
    fn splits_are_relabelled_and_gapped() {
        let s = generate_scenario(&clean()).unwrap();
        let (out, splits) = inject_splits(&s.gt, 2, 3, 6, 5, 1);
        assert_eq!(splits.len(), 2);
        for sp in &splits {
            let last = out.iter().filter(|r| r.id == sp.original).map(|r| r.frame).max().unwrap();
            let first = out.iter().filter(|r| r.id == sp.fragment).map(|r| r.frame).min().unwrap();
            assert_eq!(first - last, sp.removed + 1);
        }
        assert_eq!(out.len(), s.gt.len() - splits.iter().map(|s| s.removed as usize).sum::<usize>());
    }
}
