use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("missing artifact: {0}")]
    MissingArtifact(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("refusing to overwrite: {0}")]
    Conflict(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::MissingArtifact(_) => ExitCode::from(2),
            CliError::Config(_) => ExitCode::from(3),
            CliError::Conflict(_) | CliError::Other(_) => ExitCode::from(1),
        }
    }
}

macro_rules! other_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Other(anyhow::Error::new(e))
            }
        }
    )*};
}

other_from!(
    pqe_core::corpus::CorpusError,
    pqe_core::index::IndexError,
    pqe_core::embed::EmbedError,
    pqe_core::eval::EvalError,
    std::io::Error,
    serde_json::Error
);
