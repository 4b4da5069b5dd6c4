use std::fmt;
use std::path::PathBuf;

use covsim_core::Error as CoreError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug)]
pub struct Location {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
            if let Some(col) = self.column {
                write!(f, ":{col}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{location}: {message}")]
    Config { location: Location, message: String },
    /// Bad command-line input or an input file that does not fit its schema.
    #[error("{0}")]
    Usage(String),
    #[error("infeasible plan: {0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::Core(CoreError::Uncollapsible { .. } | CoreError::DegenerateTable { .. }) => EXIT_DEGENERATE,
            CliError::Core(CoreError::InvalidConfig(_) | CoreError::InvalidScheme(_)) => EXIT_CONFIG,
            CliError::Io { .. } | CliError::Core(_) => EXIT_FAILURE,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
