use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {reason}")]
    KeyValue { key: String, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(#[from] fmo_heom::Error),
}

impl CliError {
    /// Short category tag for the error line.
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) | CliError::UnknownKey(_) | CliError::KeyValue { .. } => "config",
            CliError::Io { .. } => "io",
            CliError::Model(_) => "model",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "io" => 3,
            _ => 4,
        }
    }
}
