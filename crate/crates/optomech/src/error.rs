use std::fmt;

use optomech_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
    pub const TRUNCATION: i32 = 4;
}

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent configuration.
    Config(String),
    /// A numerical routine failed or a verification did not hold.
    Numerical(String),
    /// The Fock truncation, sum cutoffs or grid extents are too small.
    Truncation(String),
    Io(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Parameter errors found while building core types from a config
    /// section are configuration errors tagged with the section name.
    pub fn config_field(section: &str, err: CoreError) -> Self {
        CliError::Config(format!("{section}: {err}"))
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError::Numerical(msg.into())
    }

    pub fn truncation(msg: impl Into<String>) -> Self {
        CliError::Truncation(msg.into())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn context(self, ctx: &str) -> Self {
        match self {
            CliError::Config(m) => CliError::Config(format!("{ctx}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{ctx}: {m}")),
            CliError::Truncation(m) => CliError::Truncation(format!("{ctx}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{ctx}: {m}")),
        }
    }

    /// The message without the category prefix.
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numerical(m) | CliError::Truncation(m) | CliError::Io(m) => m,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Numerical(_) => exit::NUMERICAL,
            CliError::Truncation(_) => exit::TRUNCATION,
            CliError::Io(_) => exit::IO,
        }
    }
}

/// Whether a core error means "make the truncation, cutoffs or grid larger".
pub fn is_truncation(err: &CoreError) -> bool {
    matches!(
        err,
        CoreError::TruncationInsufficient { .. }
            | CoreError::CutoffInsufficient { .. }
            | CoreError::ExtentsTooSmall { .. }
            | CoreError::DegenerateTruncation { .. }
    )
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match &err {
            e if is_truncation(e) => CliError::Truncation(err.to_string()),
            CoreError::InvalidParameter { .. }
            | CoreError::InvalidDimension { .. }
            | CoreError::InvalidTolerance(_)
            | CoreError::ResonantDivergence => CliError::Config(err.to_string()),
            _ => CliError::Numerical(err.to_string()),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Truncation(m) => write!(f, "truncation inadequate: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}
