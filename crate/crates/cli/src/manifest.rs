use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

/// One record per command run, enough to repeat it exactly.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    pub warnings: Vec<String>,
    pub wall_clock_secs: Option<f64>,
}

/// Collects the files a command writes and emits the manifest last.
pub struct RunLog {
    out_dir: PathBuf,
    manifest: Manifest,
    started: Option<Instant>,
}

impl RunLog {
    pub fn new(command: &str, argv: Vec<String>, seed: u64, out_dir: &Path, record_timing: bool) -> CliResult<Self> {
        std::fs::create_dir_all(out_dir)?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            manifest: Manifest {
                tool: "diffoci",
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                argv,
                seed,
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
                warnings: Vec::new(),
                wall_clock_secs: None,
            },
            started: record_timing.then(Instant::now),
        })
    }

    pub fn set_config<T: Serialize>(&mut self, config: &T) -> CliResult<()> {
        self.manifest.config = serde_json::to_value(config)?;
        Ok(())
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        let path = path.display().to_string();
        if self.manifest.inputs.iter().all(|r| r.path != path) {
            self.manifest.inputs.push(FileRecord {
                path,
                sha256: sha256_hex(bytes),
            });
        }
    }

    pub fn warn(&mut self, message: String) {
        log::warn!("{message}");
        if !self.manifest.warnings.contains(&message) {
            self.manifest.warnings.push(message);
        }
    }

    /// Writes `bytes` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.out_dir.join(name);
        std::fs::write(&path, bytes)?;
        self.manifest.outputs.push(FileRecord {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(mut self, stem: &str) -> CliResult<PathBuf> {
        self.manifest.wall_clock_secs = self.started.map(|t| t.elapsed().as_secs_f64());
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        let path = self.out_dir.join(format!("{stem}.manifest.json"));
        std::fs::write(&path, text)?;
        Ok(path)
    }
}
