//! Provenance attached to every JSON output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context as _, Result};
use deadwood::raster::{decode_raster, parse_annotations, AnnotationCollection, MultiChannelRaster};
use serde::{de::DeserializeOwned, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{Cli, Command};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub timings: Vec<StageTiming>,
}

/// Per-invocation state: records input digests and stage timings.
pub struct Context {
    command: &'static str,
    record_timings: bool,
    inputs: std::cell::RefCell<Vec<InputDigest>>,
    timings: std::cell::RefCell<Vec<StageTiming>>,
    clock: std::cell::Cell<Instant>,
}

impl Context {
    pub fn new(cli: &Cli) -> Self {
        let command = match cli.command {
            Command::Targets(_) => "targets",
            Command::LossEval(_) => "loss-eval",
            Command::Postprocess(_) => "postprocess",
            Command::Evaluate(_) => "evaluate",
            Command::Split(_) => "split",
            Command::Synth(_) => "synth",
            Command::Render(_) => "render",
            Command::Ablate(_) => "ablate",
        };
        Context {
            command,
            record_timings: !cli.no_timings,
            inputs: Default::default(),
            timings: Default::default(),
            clock: std::cell::Cell::new(Instant::now()),
        }
    }

    /// Reads a whole input file and records its digest.
    pub fn read(&self, role: &str, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {role} {}", path.display()))?;
        self.inputs.borrow_mut().push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    pub fn read_raster(&self, role: &str, path: &Path) -> Result<MultiChannelRaster> {
        let bytes = self.read(role, path)?;
        decode_raster(bytes.as_slice()).with_context(|| format!("{role} {}", path.display()))
    }

    pub fn read_annotations(&self, role: &str, path: &Path) -> Result<AnnotationCollection> {
        let bytes = self.read(role, path)?;
        let text = String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        parse_annotations(&text).with_context(|| format!("{role} {}", path.display()))
    }

    /// Parses an optional JSON config; `T::default()` when absent.
    pub fn read_config<T: DeserializeOwned + Default>(&self, role: &str, path: Option<&PathBuf>) -> Result<T> {
        match path {
            None => Ok(T::default()),
            Some(p) => self.read_json(role, p),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, role: &str, path: &Path) -> Result<T> {
        let bytes = self.read(role, path)?;
        let v = serde_json::from_slice(&bytes).with_context(|| format!("invalid {role} {}", path.display()))?;
        Ok(v)
    }

    /// Closes the current stage.
    pub fn lap(&self, stage: &str) {
        let now = Instant::now();
        let seconds = now.duration_since(self.clock.get()).as_secs_f64();
        self.clock.set(now);
        self.push_timing(stage, seconds);
    }

    pub fn push_timing(&self, stage: &str, seconds: f64) {
        if self.record_timings {
            self.timings.borrow_mut().push(StageTiming { stage: stage.to_string(), seconds });
        }
    }

    pub fn metadata(&self, config: impl Serialize) -> Result<RunMetadata> {
        Ok(RunMetadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: serde_json::to_value(config)?,
            inputs: self.inputs.borrow().clone(),
            timings: self.timings.borrow().clone(),
        })
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    write_file(path, &text)
}
