use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A field contains NaN or infinite samples.
    #[error("invalid field: {0}")]
    InvalidField(String),

    /// Spectral coefficients that should describe a real field violate
    /// conjugate symmetry beyond the inverse-transform threshold.
    #[error("hermitian asymmetry {defect:.3e} exceeds threshold {threshold:.1e}")]
    Asymmetry { defect: f64, threshold: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("degenerate trajectory: {0}")]
    DegenerateTrajectory(String),

    /// A post-condition that the library guarantees did not hold.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Whether the error stems from user input (bad flags, config values,
    /// unreadable files) rather than from a broken internal guarantee.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dimension(_)
                | Error::DegenerateFit(_)
                | Error::DegenerateTrajectory(_)
                | Error::Io(_)
                | Error::Serialization(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serialization(e.to_string())
    }
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Config(e.to_string().replace('\n', " ").trim().to_string())
    }
}
