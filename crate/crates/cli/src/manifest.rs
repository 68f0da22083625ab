use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Report-only checks never fail the run.
    pub hard: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seed: u64,
    pub stages: Vec<Stage>,
    pub outputs: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl RunManifest {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.hard && !c.pass)
    }

    /// 0 when every hard check passes, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            2
        }
    }
}

/// Collects checks, stage timings and output files for one run. All file
/// writes go through here.
pub struct Recorder {
    out: PathBuf,
    stages: Vec<Stage>,
    outputs: Vec<PathBuf>,
    checks: Vec<Check>,
}

impl Recorder {
    pub fn new(out: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
        Ok(Recorder {
            out: out.to_path_buf(),
            stages: Vec::new(),
            outputs: Vec::new(),
            checks: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> CliResult<T>) -> CliResult<T> {
        let start = Instant::now();
        let value = f(self);
        self.stages.push(Stage {
            name: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        value
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            hard: true,
            detail: detail.into(),
        });
    }

    pub fn report(&mut self, name: &str, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.to_string(),
            pass: true,
            hard: false,
            detail: detail.into(),
        });
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<PathBuf> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| io_err(&path, e))?;
        if !self.outputs.contains(&path) {
            self.outputs.push(path.clone());
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn finish(mut self, config: &ExperimentConfig, seed: u64) -> CliResult<RunManifest> {
        let pass = self.checks.iter().all(|c| !c.hard || c.pass);
        let manifest_path = self.out.join("manifest.json");
        self.outputs.push(manifest_path.clone());
        let manifest = RunManifest {
            config: config.clone(),
            version: ARTIFACT_VERSION.to_string(),
            seed,
            stages: self.stages,
            outputs: self.outputs,
            checks: self.checks,
            pass,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&manifest_path, text).map_err(|e| io_err(&manifest_path, e))?;
        Ok(manifest)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
