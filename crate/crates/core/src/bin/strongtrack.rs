use std::collections::HashSet;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use rayon::prelude::*;

use strongtrack::aflink::TrainConfig;
use strongtrack::config::Settings;
use strongtrack::evalkit::{evaluate, format_table, generate_scenario, MetricReport, ScenarioSpec};
use strongtrack::mot_io::parse_tracks;
use strongtrack::workflow::{refine_file, track_file, train_link_files, SequenceFiles};

#[derive(Parser)]
#[command(name = "strongtrack", version, about = "Multi-object tracking, tracklet linking and trajectory smoothing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Track detection files into MOT results.
    Track(TrackArgs),
    /// Link and interpolate an existing MOT result file.
    Refine(RefineArgs),
    /// Score results against ground truth.
    Eval(EvalArgs),
    /// Generate a synthetic scenario.
    Gen(GenArgs),
    /// Train tracklet-link weights from ground truth.
    TrainLink(TrainLinkArgs),
}

/// `--name` / `--no-name` pair; the later flag wins.
macro_rules! toggles {
    ($( $yes:ident, $no:ident, $help:literal; )*) => {
        #[derive(Args, Default)]
        struct Toggles {
            $(
                #[arg(long, help = $help, overrides_with = stringify!($no))]
                $yes: bool,
                #[arg(long, hide = true, overrides_with = stringify!($yes))]
                $no: bool,
            )*
        }

        impl Toggles {
            fn apply(&self, s: &mut Settings) -> strongtrack::Result<()> {
                $(
                    let key = stringify!($yes);
                    if self.$yes {
                        set_toggle(s, key, true)?;
                    } else if self.$no {
                        set_toggle(s, key, false)?;
                    }
                )*
                Ok(())
            }
        }
    };
}

toggles! {
    nsa, no_nsa, "Confidence-scaled measurement noise (--no-nsa disables)";
    ema, no_ema, "EMA appearance state; --no-ema uses a feature bank";
    mc, no_mc, "Add motion to the matching cost (--no-mc disables)";
    cascade, no_cascade, "Age-ordered matching cascade (--no-cascade for global assignment)";
    cmc, no_cmc, "Apply camera-motion warps (--no-cmc disables)";
    iou_stage, no_iou_stage, "Second IoU matching stage (--no-iou-stage disables)";
}

fn set_toggle(s: &mut Settings, key: &str, on: bool) -> strongtrack::Result<()> {
    if key == "ema" {
        s.set_flag("appearance_mode", if on { "ema" } else { "bank" })
    } else {
        s.set_flag(key, on)
    }
}

#[derive(Args)]
struct TrackArgs {
    /// MOT detection file; repeat for several sequences.
    #[arg(long, required = true)]
    dets: Vec<PathBuf>,
    /// Embedding sidecar, one per --dets in the same order.
    #[arg(long)]
    embs: Vec<PathBuf>,
    /// Warp file, one per --dets in the same order.
    #[arg(long)]
    warps: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    toggles: Toggles,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    max_cost: Option<f64>,
    #[arg(long)]
    min_confidence: Option<f64>,
    #[arg(long)]
    n_init: Option<u32>,
    #[arg(long)]
    max_age: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Result file, or a directory when several sequences are given.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(group(ArgGroup::new("interp").args(["gsi", "li", "no_interp"])))]
struct RefineArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Link weights; linking is skipped without them.
    #[arg(long)]
    aflink: Option<PathBuf>,
    #[arg(long)]
    gsi: bool,
    #[arg(long)]
    li: bool,
    #[arg(long)]
    no_interp: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth file; repeat for several sequences.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    /// Result file, one per --gt in the same order.
    #[arg(long, required = true)]
    pred: Vec<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    iou: f64,
    /// Accepted for uniformity; evaluation draws no random numbers.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the key=value report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Scenario spec file; defaults are used for missing keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<u32>,
    #[arg(long)]
    identities: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainLinkArgs {
    /// Ground-truth file; repeat to pool several.
    #[arg(long, required = true)]
    gt: Vec<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pairs: usize,
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Runtime(strongtrack::Error),
}

impl From<strongtrack::Error> for Failure {
    fn from(e: strongtrack::Error) -> Self {
        Failure::Runtime(e)
    }
}

type CmdResult = Result<(), Failure>;

fn base_settings(config: Option<&Path>, seed: Option<u64>) -> Result<Settings, Failure> {
    let mut s = Settings::default();
    if let Some(p) = config {
        s.apply_file(p)?;
    }
    if let Some(seed) = seed {
        s.set_flag("seed", seed)?;
    }
    Ok(s)
}

fn output_names(dets: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = dets
        .iter()
        .map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default())
        .collect();
    let unique = stems.iter().collect::<HashSet<_>>().len() == stems.len();
    stems
        .into_iter()
        .enumerate()
        .map(|(i, s)| if unique { format!("{s}.txt") } else { format!("seq{i}_{s}.txt") })
        .collect()
}

fn cmd_track(a: TrackArgs) -> CmdResult {
    for (name, n) in [("--embs", a.embs.len()), ("--warps", a.warps.len())] {
        if n != 0 && n != a.dets.len() {
            return Err(Failure::Usage(format!(
                "{name} given {n} times but --dets {} times",
                a.dets.len()
            )));
        }
    }
    let mut s = base_settings(a.config.as_deref(), a.seed)?;
    a.toggles.apply(&mut s)?;
    for (key, v) in [("lambda", a.lambda), ("max_cost", a.max_cost), ("min_confidence", a.min_confidence)] {
        if let Some(v) = v {
            s.set_flag(key, v)?;
        }
    }
    for (key, v) in [("n_init", a.n_init), ("max_age", a.max_age)] {
        if let Some(v) = v {
            s.set_flag(key, v)?;
        }
    }
    let jobs: Vec<(SequenceFiles, PathBuf)> = if a.dets.len() == 1 {
        vec![(
            SequenceFiles {
                detections: a.dets[0].clone(),
                embeddings: a.embs.first().cloned(),
                warps: a.warps.first().cloned(),
            },
            a.out.clone(),
        )]
    } else {
        std::fs::create_dir_all(&a.out)
            .map_err(|e| strongtrack::Error::io(format!("creating {}", a.out.display()), e))?;
        output_names(&a.dets)
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                (
                    SequenceFiles {
                        detections: a.dets[i].clone(),
                        embeddings: a.embs.get(i).cloned(),
                        warps: a.warps.get(i).cloned(),
                    },
                    a.out.join(name),
                )
            })
            .collect()
    };
    let results: Vec<_> = jobs
        .par_iter()
        .map(|(files, out)| track_file(files, &s, out))
        .collect();
    for r in results {
        let m = r?;
        eprintln!("wrote {}", m.outputs[0].display());
    }
    Ok(())
}

fn cmd_refine(a: RefineArgs) -> CmdResult {
    let mut s = base_settings(a.config.as_deref(), a.seed)?;
    if let Some(w) = &a.aflink {
        s.set_flag("aflink_weights", w.display())?;
    }
    if a.gsi {
        s.set_flag("interp_mode", "gsi")?;
    } else if a.li {
        s.set_flag("interp_mode", "li")?;
    } else if a.no_interp {
        s.set_flag("interp_mode", "none")?;
    }
    let (_, summary) = refine_file(&a.input, &s, &a.out)?;
    eprintln!(
        "ids {} -> {}, {} links, {} interpolated rows",
        summary.ids_before, summary.ids_after, summary.links, summary.interpolated_rows
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if a.gt.len() != a.pred.len() {
        return Err(Failure::Usage(format!(
            "--gt given {} times but --pred {} times",
            a.gt.len(),
            a.pred.len()
        )));
    }
    let mut rows = Vec::new();
    let mut total = MetricReport::default();
    for (g, p) in a.gt.iter().zip(&a.pred) {
        let report = evaluate(&parse_tracks(g)?, &parse_tracks(p)?, a.iou)?;
        total.merge(&report);
        let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        rows.push((name, report));
    }
    let mut kv = String::new();
    for (name, r) in &rows {
        kv.push_str(&r.to_key_values(name));
    }
    kv.push_str(&total.to_key_values("overall"));
    if rows.len() > 1 {
        rows.push(("OVERALL".into(), total));
    }
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = write!(std::io::stdout().lock(), "{}\n{kv}", format_table(&rows));
    if let Some(out) = &a.out {
        std::fs::write(out, &kv).map_err(|e| strongtrack::Error::io(format!("writing {}", out.display()), e))?;
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let mut spec = match &a.spec {
        Some(p) => ScenarioSpec::load(p)?,
        None => ScenarioSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if let Some(f) = a.frames {
        spec.num_frames = f;
    }
    if let Some(n) = a.identities {
        spec.num_identities = n;
    }
    let files = generate_scenario(&spec)?.write_to(&a.out)?;
    std::fs::write(a.out.join("scenario.cfg"), spec.to_text())
        .map_err(|e| strongtrack::Error::io("writing scenario.cfg", e))?;
    eprintln!("wrote {} and {}", files.gt.display(), files.detections.display());
    Ok(())
}

fn cmd_train_link(a: TrainLinkArgs) -> CmdResult {
    let config = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let (_, report) = train_link_files(&a.gt, a.pairs, &config, &a.out)?;
    for (i, l) in report.epoch_losses.iter().enumerate() {
        eprintln!("epoch {:>2}: loss {l:.4}", i + 1);
    }
    eprintln!("trained in {:.1} s, wrote {}", report.elapsed.as_secs_f64(), a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(n) = std::env::var("STRONGTRACK_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    let result = match cli.command {
        Command::Track(a) => cmd_track(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gen(a) => cmd_gen(a),
        Command::TrainLink(a) => cmd_train_link(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("strongtrack: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("strongtrack: {e}");
            ExitCode::from(1)
        }
    }
}
