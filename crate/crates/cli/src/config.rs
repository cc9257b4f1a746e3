//! Run configuration. Precedence: flags, then environment, then the config
//! file, then defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use cxnprobe::evals::{NpnFilter, ThePooling, Weighting, DEFAULT_NUCLEUS_Q};
use cxnprobe::report::TableFormat;
use cxnprobe::tagger::TaggerMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const ENV_CACHE_DIR: &str = "CXNPROBE_CACHE_DIR";
pub const ENV_LLM_API_KEY: &str = "CXNPROBE_LLM_API_KEY";

/// Dataset inputs; an absent path selects the bundled sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetPaths {
    pub cec: Option<PathBuf>,
    pub multithat: Option<PathBuf>,
    pub magpie: Option<PathBuf>,
    pub cogs: Option<PathBuf>,
    pub npn: Option<PathBuf>,
    pub npn_counts: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gateway: String,
    pub seed: u64,
    pub datasets: DatasetPaths,
    pub nucleus_q: f64,
    pub cc_weighting: Weighting,
    pub tagger: TaggerMode,
    pub threshold: f64,
    pub common_vocab: Vec<String>,
    pub output: PathBuf,
    pub format: TableFormat,
    pub cache_dir: Option<PathBuf>,
    /// Requests in flight per connection.
    pub parallel: usize,
    pub npn_filter: NpnFilter,
    pub the_pooling: ThePooling,
    pub magpie_min_confidence: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gateway: "mock".into(),
            seed: 0,
            datasets: DatasetPaths::default(),
            nucleus_q: DEFAULT_NUCLEUS_Q,
            cc_weighting: Weighting::Mass,
            tagger: TaggerMode::External,
            threshold: cxnprobe::corpus::DEFAULT_USAGE_THRESHOLD,
            common_vocab: Vec::new(),
            output: PathBuf::from("out"),
            format: TableFormat::Tsv,
            cache_dir: None,
            parallel: 1,
            npn_filter: NpnFilter::AcceptableUnseen,
            the_pooling: ThePooling::Slots,
            magpie_min_confidence: cxnprobe::datasets::MAGPIE_MIN_CONFIDENCE,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.nucleus_q > 0.0 && self.nucleus_q <= 1.0) {
            return Err(CliError::Config(format!(
                "nucleus_q must lie in (0, 1], got {}",
                self.nucleus_q
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(CliError::Config(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            )));
        }
        if !(0.0..=1.0).contains(&self.magpie_min_confidence) {
            return Err(CliError::Config(format!(
                "magpie_min_confidence must lie in [0, 1], got {}",
                self.magpie_min_confidence
            )));
        }
        if self.parallel == 0 {
            return Err(CliError::Config("parallel must be at least 1".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON rendering.
    pub fn sha256(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&json)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Flags shared by every command that reads a run configuration.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML or JSON config file; a run manifest is also accepted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// mock[:hashed|uniform|peaked=P], spawn:<command> or tcp:<host:port>.
    #[arg(long, global = true)]
    pub gateway: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// tsv, json or markdown.
    #[arg(long, global = true)]
    pub format: Option<TableFormat>,
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub parallel: Option<usize>,
    #[arg(long, global = true)]
    pub nucleus_q: Option<f64>,
    /// mass or count.
    #[arg(long, global = true)]
    pub cc_weighting: Option<Weighting>,
    /// external or rule_based.
    #[arg(long, global = true, value_parser = parse_tagger)]
    pub tagger: Option<TaggerMode>,
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Gateway spec whose vocabulary also constrains MAGPIE and NPN targets (repeatable).
    #[arg(long = "common-vocab", global = true)]
    pub common_vocab: Vec<String>,
    /// all, acceptable or acceptable_unseen.
    #[arg(long, global = true)]
    pub npn_filter: Option<NpnFilter>,
    /// slots or sentences.
    #[arg(long, global = true, value_parser = parse_pooling)]
    pub the_pooling: Option<ThePooling>,
    #[arg(long, global = true)]
    pub magpie_min_confidence: Option<f64>,
    #[arg(long, global = true)]
    pub cec: Option<PathBuf>,
    #[arg(long, global = true)]
    pub multithat: Option<PathBuf>,
    #[arg(long, global = true)]
    pub magpie: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cogs: Option<PathBuf>,
    #[arg(long, global = true)]
    pub npn: Option<PathBuf>,
    #[arg(long, global = true)]
    pub npn_counts: Option<PathBuf>,
}

fn parse_tagger(s: &str) -> Result<TaggerMode, String> {
    serde_json::from_value(Value::from(s)).map_err(|_| format!("unknown tagger mode {s:?}"))
}

fn parse_pooling(s: &str) -> Result<ThePooling, String> {
    serde_json::from_value(Value::from(s)).map_err(|_| format!("unknown pooling {s:?}"))
}

fn read_config_file(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let is_toml = path.extension().is_some_and(|e| e == "toml");
    let value: Value = if is_toml {
        toml::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    };
    // a manifest nests the resolved config under "config"
    let value = match value {
        Value::Object(mut m) if m.contains_key("config_sha256") => {
            m.remove("config").unwrap_or(Value::Null)
        }
        v => v,
    };
    serde_json::from_value(value).map_err(|e| bad(e.to_string()))
}

impl ConfigArgs {
    /// Resolves against the process environment.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        self.resolve_with_env(|k| std::env::var(k).ok())
    }

    pub fn resolve_with_env(
        &self,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<RunConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => read_config_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(dir) = env(ENV_CACHE_DIR).filter(|d| !d.is_empty()) {
            c.cache_dir = Some(PathBuf::from(dir));
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.$field = v.clone().into();
                })*
            };
        }
        take!(
            gateway,
            seed,
            output,
            format,
            parallel,
            nucleus_q,
            cc_weighting,
            tagger,
            threshold
        );
        take!(npn_filter, the_pooling, magpie_min_confidence, cache_dir);
        if !self.common_vocab.is_empty() {
            c.common_vocab = self.common_vocab.clone();
        }
        macro_rules! take_path {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field {
                    c.datasets.$field = Some(v.clone());
                })*
            };
        }
        take_path!(cec, multithat, magpie, cogs, npn, npn_counts);
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env(_: &str) -> Option<String> {
        None
    }

    #[test]
    fn defaults_are_valid() {
        let c = ConfigArgs::default().resolve_with_env(no_env).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn precedence_flags_env_file_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 3\nnucleus_q = 0.5\ncache_dir = \"/from/file\"\n[datasets]\ncec = \"c.jsonl\"\n",
        )
        .unwrap();
        let mut args = ConfigArgs {
            config: Some(path),
            ..Default::default()
        };
        let c = args.resolve_with_env(no_env).unwrap();
        assert_eq!((c.seed, c.nucleus_q), (3, 0.5));
        assert_eq!(c.cache_dir, Some(PathBuf::from("/from/file")));
        assert_eq!(c.datasets.cec, Some(PathBuf::from("c.jsonl")));
        assert_eq!(c.threshold, RunConfig::default().threshold);

        let env = |k: &str| (k == ENV_CACHE_DIR).then(|| "/from/env".to_string());
        assert_eq!(
            args.resolve_with_env(env).unwrap().cache_dir,
            Some(PathBuf::from("/from/env"))
        );

        args.seed = Some(9);
        args.cache_dir = Some(PathBuf::from("/from/flag"));
        let c = args.resolve_with_env(env).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.cache_dir, Some(PathBuf::from("/from/flag")));
    }

    #[test]
    fn json_config_and_manifest_are_accepted() {
        let dir = tempfile::tempdir().unwrap();
        let plain = dir.path().join("run.json");
        std::fs::write(&plain, r#"{"gateway":"mock:uniform","format":"markdown"}"#).unwrap();
        let args = ConfigArgs {
            config: Some(plain),
            ..Default::default()
        };
        let c = args.resolve_with_env(no_env).unwrap();
        assert_eq!(c.gateway, "mock:uniform");
        assert_eq!(c.format, TableFormat::Markdown);

        let manifest = dir.path().join("manifest.json");
        let body = serde_json::json!({"config_sha256": "x", "config": c});
        std::fs::write(&manifest, body.to_string()).unwrap();
        let args = ConfigArgs {
            config: Some(manifest),
            ..Default::default()
        };
        assert_eq!(args.resolve_with_env(no_env).unwrap(), c);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for args in [
            ConfigArgs {
                nucleus_q: Some(0.0),
                ..Default::default()
            },
            ConfigArgs {
                threshold: Some(1.5),
                ..Default::default()
            },
            ConfigArgs {
                parallel: Some(0),
                ..Default::default()
            },
        ] {
            assert!(matches!(
                args.resolve_with_env(no_env),
                Err(CliError::Config(_))
            ));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"nucleus":0.5}"#).unwrap();
        let args = ConfigArgs {
            config: Some(path),
            ..Default::default()
        };
        assert!(matches!(
            args.resolve_with_env(no_env),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.seed = 1;
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
