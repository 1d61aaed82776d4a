use thiserror::Error;

pub const EXIT_EXACT: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_APPROXIMATE: u8 = 2;
pub const EXIT_CONFIG: u8 = 64;
pub const EXIT_NUMERICAL: u8 = 70;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(#[source] nlqec::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_FAIL,
        }
    }

    /// Errors raised while turning the config into objects: always the user's to fix.
    pub fn config(e: nlqec::Error) -> Self {
        CliError::Config(e.to_string())
    }

    /// Errors raised while running the pipeline. Domain and cutoff problems
    /// still trace back to the config.
    pub fn pipeline(e: nlqec::Error) -> Self {
        use nlqec::Error as E;
        match e {
            E::DomainEmpty | E::DomainViolation(_) | E::TruncationError { .. } => CliError::Config(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
