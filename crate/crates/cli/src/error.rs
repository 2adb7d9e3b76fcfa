use surfrd_core::metrics::MetricsError;
use surfrd_core::network::NetworkError;
use surfrd_core::sfem::SfemError;
use surfrd_core::trainer::TrainError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error in {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("unknown preset `{0}` (available: paper-full, ci-small)")]
    UnknownPreset(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("training failed (section `train`): {0}")]
    Train(#[from] TrainError),
    #[error("reference solver failed (section `sfem`): {0}")]
    Sfem(#[from] SfemError),
    #[error("metric evaluation failed: {0}")]
    Metrics(#[from] MetricsError),
    #[error("model checkpoint: {0}")]
    Network(#[from] NetworkError),
}

impl CliError {
    /// Process exit status for this error category.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } | CliError::Validation { .. } | CliError::UnknownPreset(_) => 2,
            CliError::Io { .. } => 3,
            CliError::Train(_) => 4,
            CliError::Sfem(_) => 5,
            CliError::Metrics(_) => 6,
            CliError::Network(_) => 7,
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse",
            CliError::Validation { .. } => "validation",
            CliError::UnknownPreset(_) => "preset",
            CliError::Io { .. } => "io",
            CliError::Train(_) => "train",
            CliError::Sfem(_) => "sfem",
            CliError::Metrics(_) => "metrics",
            CliError::Network(_) => "network",
        }
    }
}

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}
