//! Dataset inputs, falling back to small bundled samples.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use cxnprobe::corpus::parse_counts_tsv;
use cxnprobe::datasets::{
    common_vocabulary, load_magpie_from, load_reader, DatasetKind, EvalRecord, LoadReport,
};
use cxnprobe::gateway::Gateway;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::error::CliError;

pub const SAMPLE_CEC: &str = include_str!("../../core/tests/fixtures/cec.jsonl");
pub const SAMPLE_MULTITHAT: &str = include_str!("../../core/tests/fixtures/multithat.jsonl");
pub const SAMPLE_MAGPIE: &str = include_str!("../../core/tests/fixtures/magpie.jsonl");
pub const SAMPLE_COGS: &str = include_str!("../../core/tests/fixtures/cogs.jsonl");
pub const SAMPLE_NPN: &str = include_str!("../../core/tests/fixtures/npn.jsonl");
pub const SAMPLE_NPN_COUNTS: &str = include_str!("../../core/tests/fixtures/npn_counts.tsv");
pub const SAMPLE_TABLE1: &str = include_str!("../../core/tests/fixtures/table1.tsv");
pub const SAMPLE_TABLE3: &str = include_str!("../../core/tests/fixtures/table3.tsv");

fn sample(kind: DatasetKind) -> &'static str {
    match kind {
        DatasetKind::Cec => SAMPLE_CEC,
        DatasetKind::Multithat => SAMPLE_MULTITHAT,
        DatasetKind::Magpie => SAMPLE_MAGPIE,
        DatasetKind::Cogs => SAMPLE_COGS,
        DatasetKind::Npn => SAMPLE_NPN,
    }
}

/// Where an input came from and what it hashed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// A file path, or `builtin:<name>`.
    pub source: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    #[serde(flatten)]
    pub source: Source,
    pub report: LoadReport,
    /// Records dropped by the common-vocabulary filter.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped_common_vocab: Option<usize>,
}

/// Bytes of `path`, or of the named sample when `path` is `None`.
pub fn read_input(
    path: Option<&Path>,
    builtin_name: &str,
    builtin: &'static str,
) -> Result<(Vec<u8>, Source), CliError> {
    let (bytes, source) = match path {
        Some(p) => (
            std::fs::read(p)
                .map_err(|e| CliError::Dataset(format!("cannot read {}: {e}", p.display())))?,
            p.display().to_string(),
        ),
        None => (
            builtin.as_bytes().to_vec(),
            format!("builtin:{builtin_name}"),
        ),
    };
    let sha256 = sha256_hex(&bytes);
    Ok((bytes, Source { source, sha256 }))
}

/// Loads datasets on first use and remembers their provenance.
pub struct Inputs<'a> {
    config: &'a RunConfig,
    loaded: HashMap<DatasetKind, Vec<EvalRecord>>,
    counts: Option<Option<HashMap<String, u64>>>,
    pub entries: BTreeMap<String, DatasetEntry>,
    pub count_source: Option<Source>,
}

impl<'a> Inputs<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            loaded: HashMap::new(),
            counts: None,
            entries: BTreeMap::new(),
            count_source: None,
        }
    }

    fn path(&self, kind: DatasetKind) -> Option<&Path> {
        let d = &self.config.datasets;
        match kind {
            DatasetKind::Cec => d.cec.as_deref(),
            DatasetKind::Multithat => d.multithat.as_deref(),
            DatasetKind::Magpie => d.magpie.as_deref(),
            DatasetKind::Cogs => d.cogs.as_deref(),
            DatasetKind::Npn => d.npn.as_deref(),
        }
    }

    /// Records of `kind`; MAGPIE and NPN pass through the common-vocabulary
    /// filter when one is configured.
    pub fn records(
        &mut self,
        kind: DatasetKind,
        common: &[&dyn Gateway],
    ) -> Result<&[EvalRecord], CliError> {
        if !self.loaded.contains_key(&kind) {
            let (bytes, source) = read_input(self.path(kind), kind.name(), sample(kind))?;
            let loaded = match kind {
                DatasetKind::Magpie => {
                    load_magpie_from(bytes.as_slice(), self.config.magpie_min_confidence)?
                }
                _ => load_reader(kind, bytes.as_slice())?,
            };
            let mut records = loaded.records;
            let mut dropped = None;
            let filtered = matches!(kind, DatasetKind::Magpie | DatasetKind::Npn);
            if filtered && common.len() > 1 {
                let (kept, n) = common_vocabulary(records, common)?;
                records = kept;
                dropped = Some(n);
            }
            self.entries.insert(
                kind.name().to_string(),
                DatasetEntry {
                    source,
                    report: loaded.report,
                    dropped_common_vocab: dropped,
                },
            );
            self.loaded.insert(kind, records);
        }
        Ok(&self.loaded[&kind])
    }

    /// NPN phrase counts from the configured file, or the bundled sample when
    /// the NPN records are the bundled sample too.
    pub fn npn_counts(&mut self) -> Result<Option<&HashMap<String, u64>>, CliError> {
        if self.counts.is_none() {
            let d = &self.config.datasets;
            let counts = match (&d.npn_counts, &d.npn) {
                (Some(p), _) => Some(self.read_counts(Some(p.clone()))?),
                (None, None) => Some(self.read_counts(None)?),
                (None, Some(_)) => None,
            };
            self.counts = Some(counts);
        }
        Ok(self.counts.as_ref().expect("set above").as_ref())
    }

    fn read_counts(&mut self, path: Option<PathBuf>) -> Result<HashMap<String, u64>, CliError> {
        let (bytes, source) = read_input(path.as_deref(), "npn_counts", SAMPLE_NPN_COUNTS)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| CliError::Dataset(format!("{}: {e}", source.source)))?;
        let counts = parse_counts_tsv(&text)?;
        self.count_source = Some(source);
        Ok(counts)
    }
}
