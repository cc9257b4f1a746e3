//! Output directory handling and the per-run manifest.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cxnprobe::evals::{EvalScore, TABLE_COLUMNS};
use cxnprobe::gateway::ModelInfo;
use cxnprobe::report::ReportTable;
use serde::Serialize;
use serde_json::Value;

use crate::config::{sha256_hex, RunConfig};
use crate::data::{DatasetEntry, Source};
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const SCORES: &str = "scores.jsonl";

/// Everything needed to regenerate a run's outputs. Contains no timestamps,
/// so identical runs produce identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    /// Command line after the program name.
    pub command: Vec<String>,
    pub config: RunConfig,
    pub config_sha256: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelInfo>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub common_vocab_models: Vec<ModelInfo>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub datasets: BTreeMap<String, DatasetEntry>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, Source>,
    /// Output file name to SHA-256.
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, Value>,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub struct Run {
    pub config: RunConfig,
    pub manifest: Manifest,
}

impl Run {
    pub fn start(command: Vec<String>, config: RunConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&config.output).map_err(|e| CliError::output(&config.output, e))?;
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: config.sha256(),
            seed: config.seed,
            config: config.clone(),
            model: None,
            common_vocab_models: Vec::new(),
            datasets: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            details: BTreeMap::new(),
            status: "ok",
            error: None,
        };
        Ok(Self { config, manifest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.config.output.join(name)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::output(&path, e))?;
        self.manifest
            .outputs
            .insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    /// Records the hash of an output written incrementally elsewhere.
    pub fn register(&mut self, name: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::output(&path, e))?;
        self.manifest
            .outputs
            .insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("detail serializes");
        self.manifest.details.insert(key.to_string(), v);
    }

    /// Writes the table of `scores` over the headline columns they cover.
    /// Other eval names stay in the scores file only.
    pub fn write_table(&mut self, scores: &[EvalScore]) -> Result<(), CliError> {
        let present: Vec<&str> = TABLE_COLUMNS
            .iter()
            .copied()
            .filter(|c| scores.iter().any(|s| s.eval_name == *c))
            .collect();
        let headline: Vec<EvalScore> = scores
            .iter()
            .filter(|s| present.contains(&s.eval_name.as_str()))
            .cloned()
            .collect();
        let table = ReportTable::from_scores(&headline, &present);
        let name = format!("table.{}", self.config.format.extension());
        self.write(&name, table.render(self.config.format).as_bytes())
    }

    /// Writes the manifest, recording `result`'s error if any.
    pub fn finish(mut self, result: Result<(), CliError>) -> Result<(), CliError> {
        if let Err(e) = &result {
            self.manifest.status = "failed";
            self.manifest.error = Some(e.to_string());
        }
        let mut json = serde_json::to_vec_pretty(&self.manifest).expect("manifest serializes");
        json.push(b'\n');
        let path = self.path(MANIFEST);
        std::fs::write(&path, json).map_err(|e| CliError::output(&path, e))?;
        result
    }
}

/// Appends scores to a JSONL file, flushing after every batch so a failed run
/// keeps what it finished.
pub struct ScoreSink {
    path: PathBuf,
    writer: BufWriter<File>,
    pub scores: Vec<EvalScore>,
}

impl ScoreSink {
    pub fn create(path: &Path) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::output(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
            scores: Vec::new(),
        })
    }

    pub fn extend(&mut self, scores: Vec<EvalScore>) -> Result<(), CliError> {
        let err = |e| CliError::output(&self.path, e);
        for s in &scores {
            serde_json::to_writer(&mut self.writer, s).map_err(|e| err(e.into()))?;
            self.writer.write_all(b"\n").map_err(err)?;
        }
        self.writer.flush().map_err(err)?;
        self.scores.extend(scores);
        Ok(())
    }
}
