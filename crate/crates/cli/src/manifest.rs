use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use hetnet_core::ScenarioConfig;

/// Provenance sidecar written next to each output file.
///
/// Anything that varies between identical runs lives here and never in the
/// CSV itself, so outputs stay byte-comparable.
pub struct Manifest {
    started: Instant,
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self {
            started: Instant::now(),
            entries: vec![],
        };
        m.set("tool", env!("CARGO_PKG_NAME"));
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn config(&mut self, path: Option<&Path>, cfg: &ScenarioConfig) {
        self.set(
            "config_path",
            path.map(|p| p.display().to_string()).unwrap_or_else(|| "<defaults>".into()),
        );
        for line in cfg.serialize().lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.set(&format!("config.{}", k.trim()), v.trim());
            }
        }
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "wall_clock_s={:.3}", self.started.elapsed().as_secs_f64());
        out
    }

    pub fn write_for(&self, output: &Path) -> Result<PathBuf> {
        let mut name = output.as_os_str().to_owned();
        name.push(".manifest");
        let path = PathBuf::from(name);
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
