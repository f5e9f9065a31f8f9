use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad flags, config file entries or missing inputs.
    #[error("configuration error: {0}")]
    Config(String),
    #[error("refusing to overwrite {0}: it holds a dataset with a different manifest")]
    RefuseOverwrite(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid report: {0}")]
    Report(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Core(#[from] tsplab::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::RefuseOverwrite(_) | Error::InvalidArgument(_) => 2,
            _ => 1,
        }
    }
}
