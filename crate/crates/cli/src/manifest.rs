use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{json, Value};

/// Record of one subcommand invocation. Written last, via a temporary file
/// and a rename.
#[derive(Debug)]
pub struct RunManifest {
    subcommand: &'static str,
    config: BTreeMap<String, String>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: Instant,
    started_unix: u64,
}

impl RunManifest {
    pub fn new(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            config: BTreeMap::new(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    fn to_json(&self, status: &str, error: Option<&str>) -> Value {
        let paths = |v: &[PathBuf]| -> Vec<String> { v.iter().map(|p| p.display().to_string()).collect() };
        json!({
            "subcommand": self.subcommand,
            "status": status,
            "error": error,
            "config": self.config,
            "seed": self.seed,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "inputs": paths(&self.inputs),
            "outputs": paths(&self.outputs),
            "started_unix": self.started_unix,
            "wall_seconds": self.started.elapsed().as_secs_f64(),
        })
    }

    /// Writes the manifest to `path` with the given outcome.
    pub fn finish(&self, path: &Path, error: Option<&str>) -> Result<()> {
        let status = if error.is_some() { "failed" } else { "ok" };
        let text = serde_json::to_string_pretty(&self.to_json(status, error))?;
        write_atomic(path, text.as_bytes())
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "manifest".into());
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// `<path>.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
