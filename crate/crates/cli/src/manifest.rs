//! Run manifests: everything needed to re-run a command, plus wall time.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::{io_error, CliError};

#[derive(Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<InputFile>,
    /// Every flag of the command, defaults included.
    pub parameters: Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
    pub wall_time_secs: f64,
}

pub struct Recorder {
    command: String,
    parameters: Value,
    seed: Option<u64>,
    threads: usize,
    inputs: Vec<InputFile>,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl Recorder {
    pub fn new(
        command: &str,
        parameters: &impl Serialize,
        seed: Option<u64>,
        threads: usize,
    ) -> Self {
        Self {
            command: command.to_string(),
            parameters: serde_json::to_value(parameters).unwrap_or(Value::Null),
            seed,
            threads,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        let bytes = std::fs::metadata(path).map_or(0, |m| m.len());
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            bytes,
        });
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes the manifest to `path`.
    pub fn finish(self, path: &Path) -> Result<(), CliError> {
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: self.inputs,
            parameters: self.parameters,
            seed: self.seed,
            threads: self.threads,
            outputs: self.outputs,
            wall_time_secs: self.start.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(path, text + "\n").map_err(|e| io_error(path, e))
    }
}

/// `<output>.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
