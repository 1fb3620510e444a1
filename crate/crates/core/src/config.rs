//! Resolved run settings with the origin of every value.
//!
//! Values start from built-in defaults, may be overridden by a `key = value`
//! file and then by command-line flags. Keys beginning with `manifest.` are
//! run metadata and are skipped when a file is loaded, so a manifest can be
//! fed back as a config file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::aflink::LinkThresholds;
use crate::error::{Error, Result};
use crate::interpolation::{GsiConfig, InterpolationMode};
use crate::mot_io::parse_key_values;
use crate::tracker::TrackerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Default,
    File,
    Flag,
    /// Forced by another setting or by the inputs at hand.
    Derived,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Default => "default",
            Self::File => "file",
            Self::Flag => "flag",
            Self::Derived => "derived",
        })
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Bool,
    Real,
    Count,
    Path,
    Choice(&'static [&'static str]),
}

const KEYS: &[(&str, Kind)] = &[
    ("nsa", Kind::Bool),
    ("cmc", Kind::Bool),
    ("warp_file", Kind::Path),
    ("appearance", Kind::Bool),
    ("appearance_mode", Kind::Choice(&["ema", "bank"])),
    ("ema_alpha", Kind::Real),
    ("bank_size", Kind::Count),
    ("lambda", Kind::Real),
    ("mc", Kind::Bool),
    ("max_cost", Kind::Real),
    ("gate_threshold", Kind::Real),
    ("cascade", Kind::Bool),
    ("iou_stage", Kind::Bool),
    ("min_confidence", Kind::Real),
    ("n_init", Kind::Count),
    ("max_age", Kind::Count),
    ("output_raw_boxes", Kind::Bool),
    ("aflink_weights", Kind::Path),
    ("link_max_gap", Kind::Count),
    ("link_max_dist", Kind::Real),
    ("link_min_score", Kind::Real),
    ("interp_mode", Kind::Choice(&["none", "li", "gsi"])),
    ("gsi_tau", Kind::Real),
    ("gsi_sigma2", Kind::Real),
    ("gsi_max_gap", Kind::Count),
    ("gsi_lambda_min", Kind::Real),
    ("seed", Kind::Count),
];

fn kind_of(key: &str) -> Option<Kind> {
    KEYS.iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind)
}

fn check_value(key: &str, value: &str) -> Result<()> {
    let kind = kind_of(key).ok_or_else(|| Error::Config(format!("unknown setting `{key}`")))?;
    let ok = match kind {
        Kind::Bool => matches!(value, "true" | "false"),
        Kind::Real => value.parse::<f64>().is_ok_and(f64::is_finite),
        Kind::Count => value.parse::<u64>().is_ok(),
        Kind::Path => true,
        Kind::Choice(options) => options.contains(&value),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Config(format!("invalid value `{value}` for `{key}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    values: BTreeMap<&'static str, (String, Provenance)>,
}

impl Default for Settings {
    fn default() -> Self {
        let t = TrackerConfig::default();
        let l = LinkThresholds::default();
        let g = GsiConfig::default();
        let defaults: Vec<(&'static str, String)> = vec![
            ("nsa", t.nsa.to_string()),
            ("cmc", t.cmc.to_string()),
            ("warp_file", String::new()),
            ("appearance", t.appearance.to_string()),
            ("appearance_mode", if t.ema { "ema" } else { "bank" }.into()),
            ("ema_alpha", t.ema_alpha.to_string()),
            ("bank_size", t.bank_size.to_string()),
            ("lambda", t.lambda.to_string()),
            ("mc", t.mc.to_string()),
            ("max_cost", t.max_cost.to_string()),
            ("gate_threshold", t.gate_threshold.to_string()),
            ("cascade", t.cascade.to_string()),
            ("iou_stage", t.iou_stage.to_string()),
            ("min_confidence", t.min_confidence.to_string()),
            ("n_init", t.n_init.to_string()),
            ("max_age", t.max_age.to_string()),
            ("output_raw_boxes", t.output_raw_boxes.to_string()),
            ("aflink_weights", String::new()),
            ("link_max_gap", l.max_gap.to_string()),
            ("link_max_dist", l.max_dist.to_string()),
            ("link_min_score", l.min_score.to_string()),
            ("interp_mode", InterpolationMode::Gsi.to_string()),
            ("gsi_tau", g.tau.to_string()),
            ("gsi_sigma2", g.noise_variance.to_string()),
            ("gsi_max_gap", g.max_gap.to_string()),
            ("gsi_lambda_min", g.lambda_min.to_string()),
            ("seed", "0".into()),
        ];
        debug_assert_eq!(defaults.len(), KEYS.len());
        Self {
            values: defaults
                .into_iter()
                .map(|(k, v)| (k, (v, Provenance::Default)))
                .collect(),
        }
    }
}

impl Settings {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        KEYS.iter().map(|&(k, _)| k)
    }

    fn set(&mut self, key: &str, value: &str, provenance: Provenance) -> Result<()> {
        check_value(key, value)?;
        let slot = self.values.get_mut(key).expect("checked key");
        *slot = (value.to_string(), provenance);
        Ok(())
    }

    pub fn set_flag(&mut self, key: &str, value: impl ToString) -> Result<()> {
        self.set(key, &value.to_string(), Provenance::Flag)
    }

    pub fn set_derived(&mut self, key: &str, value: impl ToString) -> Result<()> {
        self.set(key, &value.to_string(), Provenance::Derived)
    }

    /// Applies a `key = value` text. Unknown keys are errors, except run
    /// metadata under `manifest.`.
    pub fn apply_text(&mut self, text: &str, path: &Path) -> Result<()> {
        for kv in parse_key_values(text, path)? {
            if kv.key.starts_with("manifest.") {
                continue;
            }
            self.set(&kv.key, &kv.value, Provenance::File).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: kv.line,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        self.apply_text(&text, path)
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key].0
    }

    pub fn provenance(&self, key: &str) -> Provenance {
        self.values[key].1
    }

    fn bool(&self, key: &str) -> bool {
        self.get(key) == "true"
    }

    fn real(&self, key: &str) -> f64 {
        self.get(key).parse().expect("validated on set")
    }

    fn count(&self, key: &str) -> u64 {
        self.get(key).parse().expect("validated on set")
    }

    fn count_u32(&self, key: &str) -> Result<u32> {
        u32::try_from(self.count(key)).map_err(|_| Error::Config(format!("`{key}` is too large")))
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        let v = self.get(key);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    pub fn tracker_config(&self) -> Result<TrackerConfig> {
        let config = TrackerConfig {
            nsa: self.bool("nsa"),
            ema: self.get("appearance_mode") == "ema",
            mc: self.bool("mc"),
            cascade: self.bool("cascade"),
            cmc: self.bool("cmc"),
            iou_stage: self.bool("iou_stage"),
            appearance: self.bool("appearance"),
            output_raw_boxes: self.bool("output_raw_boxes"),
            lambda: self.real("lambda"),
            max_cost: self.real("max_cost"),
            gate_threshold: self.real("gate_threshold"),
            ema_alpha: self.real("ema_alpha"),
            min_confidence: self.real("min_confidence"),
            bank_size: self.count("bank_size") as usize,
            n_init: self.count_u32("n_init")?,
            max_age: self.count_u32("max_age")?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn link_thresholds(&self) -> Result<LinkThresholds> {
        let t = LinkThresholds {
            max_gap: self.count_u32("link_max_gap")?,
            max_dist: self.real("link_max_dist"),
            min_score: self.real("link_min_score"),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn gsi_config(&self) -> Result<GsiConfig> {
        let g = GsiConfig {
            tau: self.real("gsi_tau"),
            noise_variance: self.real("gsi_sigma2"),
            max_gap: self.count_u32("gsi_max_gap")?,
            lambda_min: self.real("gsi_lambda_min"),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn interp_mode(&self) -> InterpolationMode {
        self.get("interp_mode").parse().expect("validated on set")
    }

    pub fn warp_file(&self) -> Option<PathBuf> {
        self.path("warp_file")
    }

    pub fn aflink_weights(&self) -> Option<PathBuf> {
        self.path("aflink_weights")
    }

    pub fn seed(&self) -> u64 {
        self.count("seed")
    }

    /// One `key = value  # provenance` line per setting, in key order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for key in Self::keys() {
            let (v, p) = &self.values[key];
            let _ = writeln!(s, "{key} = {v}  # {p}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_default_configs() {
        let s = Settings::default();
        assert_eq!(s.tracker_config().unwrap(), TrackerConfig::default());
        assert_eq!(s.link_thresholds().unwrap(), LinkThresholds::default());
        assert_eq!(s.gsi_config().unwrap(), GsiConfig::default());
        assert_eq!(s.interp_mode(), InterpolationMode::Gsi);
        assert!(Settings::keys().all(|k| s.provenance(k) == Provenance::Default));
    }

    #[test]
    fn layering_records_provenance() {
        let mut s = Settings::default();
        s.apply_text("nsa = false\nlambda = 0.5 # tuned\nmanifest.version = 1\n", Path::new("c"))
            .unwrap();
        s.set_flag("lambda", 0.7).unwrap();
        s.set_derived("appearance", false).unwrap();
        assert_eq!(s.provenance("nsa"), Provenance::File);
        assert_eq!(s.provenance("lambda"), Provenance::Flag);
        assert_eq!(s.provenance("appearance"), Provenance::Derived);
        let t = s.tracker_config().unwrap();
        assert!(!t.nsa && !t.appearance);
        assert_eq!(t.lambda, 0.7);
    }

    #[test]
    fn text_round_trips_values() {
        let mut s = Settings::default();
        s.set_flag("interp_mode", "li").unwrap();
        s.set_flag("aflink_weights", "w.afl").unwrap();
        let mut back = Settings::default();
        back.apply_text(&s.to_text(), Path::new("m")).unwrap();
        for k in Settings::keys() {
            assert_eq!(back.get(k), s.get(k));
        }
        assert_eq!(back.aflink_weights(), Some(PathBuf::from("w.afl")));
        assert_eq!(back.warp_file(), None);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut s = Settings::default();
        assert!(matches!(s.apply_text("bogus = 1", Path::new("c")), Err(Error::Parse { line: 1, .. })));
        assert!(s.set_flag("nsa", "yes").is_err());
        assert!(s.set_flag("interp_mode", "cubic").is_err());
        assert!(s.set_flag("n_init", -1).is_err());
        s.set_flag("n_init", 0).unwrap();
        assert!(matches!(s.tracker_config(), Err(Error::Config(_))));
    }
}
