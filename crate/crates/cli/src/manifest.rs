//! Run manifests and artifact output.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

/// Everything that determines the numbers a run produces. The hash covers
/// exactly these fields, so reruns with the same inputs write identical
/// artifacts wherever they are written and however many workers they use.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub spec: Option<Value>,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub tolerances: Value,
    /// Artifact file names, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, spec: Option<Value>, parameters: Value, tolerances: Value) -> Self {
        RunManifest {
            command: command.into(),
            spec,
            parameters,
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            tolerances,
            outputs: Vec::new(),
        }
    }

    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("manifest serialises");
        Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Collects artifacts in memory and writes them, with the manifest, once the
/// command has finished computing.
pub struct Run {
    pub manifest: RunManifest,
    out_dir: PathBuf,
    workers: usize,
    started: Instant,
    files: Vec<(String, Artifact)>,
}

enum Artifact {
    Json(Value),
    Csv(String),
}

impl Run {
    pub fn new(manifest: RunManifest, out_dir: &Path, workers: usize) -> Self {
        Run { manifest, out_dir: out_dir.to_path_buf(), workers, started: Instant::now(), files: Vec::new() }
    }

    pub fn json(&mut self, name: &str, report: impl Serialize) {
        let value = serde_json::to_value(report).expect("report serialises");
        self.files.push((name.into(), Artifact::Json(value)));
    }

    pub fn csv(&mut self, name: &str, body: String) {
        self.files.push((name.into(), Artifact::Csv(body)));
    }

    /// Writes every artifact, each tagged with the manifest hash, then
    /// `manifest.json`. Returns the hash.
    pub fn finish(mut self) -> Result<String, Failure> {
        self.manifest.outputs = self.files.iter().map(|(n, _)| n.clone()).collect();
        let hash = self.manifest.hash();
        fs::create_dir_all(&self.out_dir).map_err(|e| Failure::io(&self.out_dir, e))?;
        for (name, artifact) in &self.files {
            let text = match artifact {
                Artifact::Json(v) => {
                    let tagged = json!({ "manifest_hash": hash, "report": v });
                    serde_json::to_string_pretty(&tagged).expect("json") + "\n"
                }
                Artifact::Csv(body) => format!("# manifest_hash={hash}\n{body}"),
            };
            let path = self.out_dir.join(name);
            fs::write(&path, text).map_err(|e| Failure::io(&path, e))?;
        }
        let record = json!({
            "manifest": self.manifest,
            "hash": hash,
            "out_dir": self.out_dir.display().to_string(),
            "workers": self.workers,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = self.out_dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&record).expect("json") + "\n")
            .map_err(|e| Failure::io(&path, e))?;
        Ok(hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_inputs_only() {
        let a = RunManifest::new("kernel", None, json!({"y": 0.5}), json!({}));
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        b.seed = Some(1);
        assert_ne!(a.hash(), b.hash());
    }
}
