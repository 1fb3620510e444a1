//! Run manifests: resolved settings, input digests and per-stage rates.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::{Error, Result};

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTiming {
    pub stage: String,
    /// Records, pairs or trajectories processed.
    pub items: usize,
    pub elapsed: Duration,
}

impl StageTiming {
    pub fn hz(&self) -> f64 {
        let secs = self.elapsed.as_secs_f64();
        if secs > 0.0 {
            self.items as f64 / secs
        } else {
            f64::INFINITY
        }
    }
}

/// Everything needed to reproduce a run. Written as `key = value` text: the
/// settings appear under their own keys, everything else under `manifest.`.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub command: String,
    pub settings: Settings,
    pub inputs: Vec<(String, PathBuf, String)>,
    pub outputs: Vec<PathBuf>,
    pub timings: Vec<StageTiming>,
    pub notes: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str, settings: Settings) -> Self {
        Self {
            command: command.to_string(),
            settings,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Records an input under `role` together with its digest.
    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<()> {
        let digest = file_digest(path)?;
        self.inputs.push((role.to_string(), path.to_path_buf(), digest));
        Ok(())
    }

    pub fn time(&mut self, stage: &str, items: usize, elapsed: Duration) {
        self.timings.push(StageTiming {
            stage: stage.to_string(),
            items,
            elapsed,
        });
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "manifest.tool = strongtrack {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "manifest.command = {}", self.command);
        for (role, path, digest) in &self.inputs {
            let _ = writeln!(s, "manifest.input.{role} = {}", path.display());
            let _ = writeln!(s, "manifest.input.{role}.sha256 = {digest}");
        }
        for (i, p) in self.outputs.iter().enumerate() {
            let _ = writeln!(s, "manifest.output.{i} = {}", p.display());
        }
        for t in &self.timings {
            let _ = writeln!(s, "manifest.timing.{}.items = {}", t.stage, t.items);
            let _ = writeln!(s, "manifest.timing.{}.seconds = {:.6}", t.stage, t.elapsed.as_secs_f64());
            let _ = writeln!(s, "manifest.timing.{}.hz = {:.1}", t.stage, t.hz());
        }
        for (k, v) in &self.notes {
            let _ = writeln!(s, "manifest.{k} = {v}");
        }
        s.push_str(&self.settings.to_text());
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}

/// Conventional manifest location next to an output file.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest");
    output.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Provenance;

    #[test]
    fn digest_of_known_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(
            file_digest(&p).unwrap(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_reloads_as_config() {
        let mut settings = Settings::default();
        settings.set_flag("nsa", false).unwrap();
        let mut m = RunManifest::new("track", settings.clone());
        m.time("track", 100, Duration::from_millis(50));
        m.note("interp_ran", "gsi");
        let text = m.to_text();
        assert!(text.contains("manifest.timing.track.hz = 2000.0"));
        assert!(text.contains("nsa = false  # flag"));
        for key in Settings::keys() {
            assert_eq!(text.lines().filter(|l| l.starts_with(&format!("{key} = "))).count(), 1);
        }
        let mut back = Settings::default();
        back.apply_text(&text, Path::new("m")).unwrap();
        assert_eq!(back.get("nsa"), "false");
        assert_eq!(back.provenance("nsa"), Provenance::File);
    }

    #[test]
    fn sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/res.txt")), PathBuf::from("out/res.txt.manifest"));
    }
}
