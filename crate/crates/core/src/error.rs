use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested value is singular (e.g. a divergent spectral term).
    #[error("singular input: {0}")]
    Singular(String),

    /// An integrator or solver could not meet its tolerance.
    #[error("numerical failure: {message}")]
    Numerical { message: String, diagnostics: String },

    /// An iterative fit stopped without converging.
    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    /// Invalid configuration or input schema.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse error category, used for process exit codes and C status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Domain,
    Singular,
    Numerical,
    NonConvergence,
    Config,
    Io,
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Domain(_) => ErrorCategory::Domain,
            Error::Singular(_) => ErrorCategory::Singular,
            Error::Numerical { .. } => ErrorCategory::Numerical,
            Error::NonConvergence(_) => ErrorCategory::NonConvergence,
            Error::Config(_) => ErrorCategory::Config,
            Error::Io(_) => ErrorCategory::Io,
        }
    }

    /// Process exit code: schema/config problems 2, numerical trouble 3, I/O 4.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Domain | ErrorCategory::Config => 2,
            ErrorCategory::Singular | ErrorCategory::Numerical | ErrorCategory::NonConvergence => 3,
            ErrorCategory::Io => 4,
        }
    }

    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self.category() {
            ErrorCategory::Domain => "domain",
            ErrorCategory::Singular => "singular",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::NonConvergence => "non-convergence",
            ErrorCategory::Config => "config",
            ErrorCategory::Io => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
