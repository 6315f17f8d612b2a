use std::path::PathBuf;

use serde_json::json;

/// Exit status for every reported failure.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    /// A malformed input line; `row` is the 1-based line number in the file.
    #[error("{}, row {row}: {message}", path.display())]
    Parse { path: PathBuf, row: usize, message: String },

    /// A malformed file that cannot be pinned to one line.
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Model(#[from] bentcable_core::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> &'static str {
        use bentcable_core::Error as E;
        match self {
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => "not_found",
            CliError::Io { .. } => "io",
            CliError::Parse { .. } => "parse",
            CliError::Format { .. } => "format",
            CliError::Config(_) => "config",
            CliError::Usage(_) => "usage",
            CliError::Model(e) => match e {
                E::Setup(_) => "data",
                E::Domain(_) => "domain",
                E::NotSpd(_) => "not_spd",
                E::SamplerAbort { .. } => "sampler_abort",
                E::Settings(_) => "settings",
                E::UnknownScenario(_) => "unknown_scenario",
                E::EmptyChain => "empty_chain",
            },
        }
    }

    /// Machine-readable form written to standard error.
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": { "kind": self.kind(), "message": self.to_string() } });
        match self {
            CliError::Io { path, .. } | CliError::Format { path, .. } => {
                v["error"]["path"] = json!(path);
            }
            CliError::Parse { path, row, .. } => {
                v["error"]["path"] = json!(path);
                v["error"]["row"] = json!(row);
            }
            _ => {}
        }
        v
    }
}
