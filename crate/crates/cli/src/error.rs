use std::fmt;

/// Everything the binary can fail with, each mapped to a distinct exit code.
#[derive(Debug)]
pub enum CliError {
    Core(wigcorr::Error),
    /// A result or manifest file that could not be read back.
    Parse(String),
    Io(String),
    /// The run completed but at least one check failed.
    ChecksFailed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Core(wigcorr::Error::Capacity(_)) => 3,
            CliError::Core(wigcorr::Error::Domain(_) | wigcorr::Error::Regime(_)) => 4,
            CliError::Core(wigcorr::Error::Numerical(_)) => 5,
            CliError::Parse(_) => 6,
            CliError::ChecksFailed => 7,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::ChecksFailed => f.write_str("one or more checks failed"),
        }
    }
}

impl From<wigcorr::Error> for CliError {
    fn from(e: wigcorr::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(format!("serialization: {e}"))
    }
}
