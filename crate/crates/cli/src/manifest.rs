use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub n: usize,
    pub sigma: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    /// Path relative to the manifest's directory.
    pub file: String,
    pub sha256: String,
}

/// Record of one run. Contains no clock or host data so that reruns
/// reproduce it byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: ParamRecord,
    pub settings: BTreeMap<String, serde_json::Value>,
    pub tool_version: String,
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(command: &str, params: ParamRecord) -> Self {
        Self {
            command: command.to_owned(),
            params,
            settings: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            tolerances: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn setting(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("setting serializes");
        self.settings.insert(key.to_owned(), v);
    }

    pub fn tolerance(&mut self, key: &str, value: f64) {
        self.tolerances.insert(key.to_owned(), value);
    }

    /// Hashes `dir/file` and records it.
    pub fn add_output(&mut self, dir: &Path, file: &str) -> Result<(), Failure> {
        let sha256 = digest_file(&dir.join(file))?;
        self.outputs.push(OutputDigest { file: file.to_owned(), sha256 });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, Failure> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
        serde_json::from_str(&text).map_err(|e| Failure::BadInput(format!("{}: {e}", path.display())))
    }

    /// Files that are missing or whose digest changed.
    pub fn mismatches(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|o| digest_file(&dir.join(&o.file)).ok().as_deref() != Some(o.sha256.as_str()))
            .map(|o| o.file.clone())
            .collect()
    }
}

pub fn digest_file(path: &Path) -> Result<String, Failure> {
    let bytes = fs::read(path).map_err(|e| io_failure(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))
}

pub fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::BadInput(format!("{}: {e}", path.display()))
}
