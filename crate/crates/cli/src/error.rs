use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] polylab::Error),
    /// A solver run stopped on an invariant trip; the last good state is kept.
    #[error("run aborted: {}", .failure.error)]
    Aborted { failure: Box<polylab::rd::RdFailure>, beta: f64, kernel: String },
}

pub type Result<T> = std::result::Result<T, CliError>;
