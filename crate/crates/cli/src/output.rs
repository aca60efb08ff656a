use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

use coopsolve_core::rng::derive_seed;

/// `path` if free, else the first free `stem.K.ext` for K = 1, 2, ...
pub fn versioned(path: &Path) -> PathBuf {
    if !path.exists() {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    (1u32..)
        .map(|k| {
            let name = match &ext {
                Some(e) => format!("{stem}.{k}.{e}"),
                None => format!("{stem}.{k}"),
            };
            path.with_file_name(name)
        })
        .find(|p| !p.exists())
        .expect("some version is free")
}

/// Writes through a temporary sibling and renames, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = path.with_file_name(format!(
        ".{}.partial",
        path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default()
    ));
    fs::write(&tmp, bytes).map_err(coopsolve_core::Error::from)?;
    fs::rename(&tmp, path).map_err(coopsolve_core::Error::from)?;
    Ok(())
}

/// Serializes `value` as one JSON document with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(coopsolve_core::Error::from)?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedSource {
    Argument,
    Entropy,
}

/// Seed from the command line, or a fresh one from the clock and process id.
pub fn resolve_seed(seed: Option<u64>) -> (u64, SeedSource) {
    match seed {
        Some(s) => (s, SeedSource::Argument),
        None => {
            let nanos = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64);
            let s = derive_seed(nanos, u64::from(std::process::id()));
            eprintln!("no --seed given; using seed {s} drawn from entropy (recorded in the manifest)");
            (s, SeedSource::Entropy)
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    git_describe: &'static str,
    command: &'a str,
    args: Vec<String>,
    seed: Option<u64>,
    seed_source: Option<SeedSource>,
    started_unix: f64,
    wall_clock_seconds: f64,
    outputs: &'a [PathBuf],
    config: &'a serde_json::Value,
}

/// Tracks one command invocation and writes its manifest.
pub struct Run {
    command: &'static str,
    started: Instant,
    started_unix: f64,
    seed: Option<(u64, SeedSource)>,
    outputs: Vec<PathBuf>,
}

impl Run {
    pub fn new(command: &'static str) -> Self {
        Run {
            command,
            started: Instant::now(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0.0, |d| d.as_secs_f64()),
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn seed(&mut self, seed: Option<u64>) -> u64 {
        let s = resolve_seed(seed);
        self.seed = Some(s);
        s.0
    }

    /// Writes `bytes` to a free version of `path` and records it.
    pub fn emit(&mut self, path: &Path, bytes: &[u8]) -> Result<PathBuf> {
        let target = versioned(path);
        write_atomic(&target, bytes)?;
        if target != path {
            eprintln!("{} exists; wrote {}", path.display(), target.display());
        }
        self.outputs.push(target.clone());
        Ok(target)
    }

    /// Records a file written elsewhere.
    pub fn record(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    /// Writes `<first output>.manifest.json` beside the primary artifact.
    pub fn finish<T: Serialize>(self, config: &T) -> Result<PathBuf> {
        let config = serde_json::to_value(config).map_err(coopsolve_core::Error::from)?;
        let manifest = Manifest {
            tool: "coopsolve",
            version: env!("CARGO_PKG_VERSION"),
            git_describe: env!("COOPSOLVE_GIT_DESCRIBE"),
            command: self.command,
            args: std::env::args().collect(),
            seed: self.seed.map(|s| s.0),
            seed_source: self.seed.map(|s| s.1),
            started_unix: self.started_unix,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            outputs: &self.outputs,
            config: &config,
        };
        let base = self
            .outputs
            .first()
            .cloned()
            .unwrap_or_else(|| PathBuf::from(self.command));
        let path = versioned(&PathBuf::from(format!("{}.manifest.json", base.display())));
        write_atomic(&path, &json_bytes(&manifest)?)?;
        Ok(path)
    }
}
