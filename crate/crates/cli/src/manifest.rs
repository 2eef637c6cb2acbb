//! Per-run manifest: config hash, seeds and every file the run produced.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the command name, its arguments and the effective config.
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<String>,
    /// Relative to the output directory when inside it.
    pub files: Vec<String>,
}

pub fn config_hash(command: &str, args: &impl Serialize, config: &impl Serialize) -> String {
    let doc = serde_json::json!({ "command": command, "args": args, "config": config });
    let digest = Sha256::digest(serde_json::to_vec(&doc).expect("config serializes"));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn manifest_path(out_dir: &Path, command: &str) -> PathBuf {
    out_dir.join(format!("run-{command}.json"))
}

impl RunManifest {
    pub fn new(command: &str, config_hash: String) -> Self {
        Self {
            tool: "sixway".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash,
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn file(&mut self, out_dir: &Path, p: &Path) {
        let rel = p.strip_prefix(out_dir).unwrap_or(p);
        self.files.push(rel.display().to_string());
    }

    pub fn write(&self, out_dir: &Path) -> std::io::Result<PathBuf> {
        let path = manifest_path(out_dir, &self.command);
        std::fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes") + "\n")?;
        Ok(path)
    }
}
