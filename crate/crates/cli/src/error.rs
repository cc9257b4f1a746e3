use std::process::ExitCode;

use cxnprobe::corpus::CorpusError;
use cxnprobe::datasets::DatasetError;
use cxnprobe::evals::EvalError;
use cxnprobe::gateway::GatewayError;
use cxnprobe::report::ReportError;
use cxnprobe::AffinityError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("gateway error: {0}")]
    Gateway(#[from] GatewayError),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Gateway(_) => 2,
            CliError::Dataset(_) => 3,
        })
    }

    pub fn output(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Output {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Gateway(g) => CliError::Gateway(g),
            EvalError::Distribution(d) => {
                CliError::Gateway(GatewayError::BadRequest(format!("adapter sent {d}")))
            }
            EvalError::BadThreshold(_) => CliError::Config(e.to_string()),
            other => CliError::Dataset(other.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Gateway(g) => CliError::Gateway(g),
            DatasetError::Endpoint(_) => CliError::Gateway(GatewayError::Transport(e.to_string())),
            other => CliError::Dataset(other.to_string()),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Gateway(g) => CliError::Gateway(g),
            CorpusError::BadThreshold(_) | CorpusError::BadArity(_) | CorpusError::EmptyWord(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Dataset(other.to_string()),
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Dataset(e.to_string())
    }
}

impl From<AffinityError> for CliError {
    fn from(e: AffinityError) -> Self {
        match e {
            AffinityError::Gateway(g) => CliError::Gateway(g),
            AffinityError::SamePosition(_) | AffinityError::NoSuchWord(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Dataset(other.to_string()),
        }
    }
}
