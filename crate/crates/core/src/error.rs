use alloc::string::String;

/// Errors raised by the model, data and sampling layers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Data or model configuration is unusable (too few observations, bad
    /// ordering, duplicated keys, ...).
    #[error("model setup: {0}")]
    Setup(String),

    /// A parameter left its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix that must be symmetric positive definite is not.
    #[error("matrix `{0}` is not symmetric positive definite")]
    NotSpd(&'static str),

    /// Cholesky factorization failed even after jitter too often to continue.
    #[error("sampler aborted at iteration {iteration}: {detail}")]
    SamplerAbort { iteration: usize, detail: String },

    #[error("invalid settings: {0}")]
    Settings(String),

    #[error("unknown scenario `{0}` (expected one of S1a, S1b, S2, S3)")]
    UnknownScenario(String),

    #[error("empty chain: no retained draws")]
    EmptyChain,
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
