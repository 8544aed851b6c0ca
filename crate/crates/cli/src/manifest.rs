use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every set of outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    /// Derived from the config (minus output locations) and the input
    /// digests, so reruns with identical inputs share it.
    pub run_id: String,
    pub timestamp: String,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, inputs: Vec<InputDigest>) -> Self {
        let mut h = Sha256::new();
        h.update(without_outputs(&config).to_string().as_bytes());
        for i in &inputs {
            h.update(i.path.as_bytes());
            h.update(i.sha256.as_bytes());
        }
        RunManifest {
            tool: "hedgegraph",
            version: env!("CARGO_PKG_VERSION"),
            run_id: hex::encode(&h.finalize()[..8]),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            config,
            inputs,
            outputs: Vec::new(),
        }
    }
}

fn without_outputs(v: &serde_json::Value) -> serde_json::Value {
    match v {
        serde_json::Value::Object(map) => map
            .iter()
            .filter(|(k, _)| !matches!(k.as_str(), "output" | "out"))
            .map(|(k, v)| (k.clone(), without_outputs(v)))
            .collect(),
        other => other.clone(),
    }
}

pub fn digest_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(InputDigest { path: path.display().to_string(), sha256: hex::encode(Sha256::digest(&bytes)) })
}

/// Digests of a file, or of every CSV directly inside a directory.
pub fn digest_input(path: &Path) -> Result<Vec<InputDigest>> {
    if !path.is_dir() {
        return Ok(vec![digest_file(path)?]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
        .collect();
    files.sort();
    files.iter().map(|p| digest_file(p)).collect()
}
