use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Invalid flags or configuration values.
    #[error("{0}")]
    Config(String),

    /// Missing, unreadable or malformed input files.
    #[error("{0}")]
    Data(String),

    /// Failure while running a validated configuration.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Runtime(_) => "runtime",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }

    /// One machine-parseable line: `error[kind]: message`.
    pub fn render(&self) -> String {
        let msg = self.to_string().replace(['\n', '\r'], " ");
        format!("error[{}]: {msg}", self.kind())
    }

    /// Errors raised while checking a configuration are configuration errors
    /// whatever the core library calls them.
    pub fn config(e: impl std::fmt::Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl From<sgfl_core::Error> for CliError {
    fn from(e: sgfl_core::Error) -> Self {
        use sgfl_core::Error as E;
        match e {
            E::Io { .. } | E::Data(_) | E::Json(_) => CliError::Data(e.to_string()),
            E::Shape(_) | E::InvalidArgument(_) => CliError::Runtime(e.to_string()),
        }
    }
}
