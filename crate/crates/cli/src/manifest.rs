use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::{CliResult, Failure};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Everything needed to rerun a command: the parsed arguments (`config`),
/// derived settings (`resolved`), and the files it wrote, relative to the
/// manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: Value,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub resolved: Value,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, seed: Option<u64>, config: &impl Serialize) -> Self {
        Manifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed,
            config: serde_json::to_value(config).expect("arguments serialize"),
            resolved: Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn with_resolved(mut self, resolved: &impl Serialize) -> Self {
        self.resolved = serde_json::to_value(resolved).expect("configuration serializes");
        self
    }

    pub fn write(&self, dir: &Path) -> CliResult {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Failure::write(&path, e))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| Failure::read(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
    }
}

/// Creates `dir` if needed; failure here is a runtime error.
pub fn ensure_dir(dir: &Path) -> CliResult {
    fs::create_dir_all(dir).map_err(|e| Failure::write(dir, e))
}

pub fn write_output(path: &Path, contents: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, contents).map_err(|e| Failure::write(path, e))
}

/// Directory holding `file`; the current directory for bare file names.
pub fn parent_dir(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Input paths are stored absolute so a manifest can be replayed from
/// anywhere.
pub fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}
