use std::fmt;

use leafnet::Error;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// A failure tagged with the exit code it maps to and the module that
/// raised it.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub module: &'static str,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn new(code: i32, module: &'static str, message: impl Into<String>) -> Self {
        CliError { code, module, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        CliError::new(EXIT_CONFIG, "config", message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.module, self.message)
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Usage(_) | Error::Config(_) => EXIT_CONFIG,
        Error::Numeric { .. } => EXIT_NUMERIC,
        Error::Shape(_)
        | Error::Input(_)
        | Error::Validation(_)
        | Error::Parse { .. }
        | Error::Folding { .. }
        | Error::Join(_)
        | Error::Container(_)
        | Error::Io { .. } => EXIT_DATA,
    }
}

/// Attaches the name of the module an error came from.
pub trait Context<T> {
    fn ctx(self, module: &'static str) -> CliResult<T>;
}

impl<T> Context<T> for leafnet::Result<T> {
    fn ctx(self, module: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError::new(exit_code(&e), module, e.to_string()))
    }
}

/// Filesystem failures on output paths.
pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::new(EXIT_DATA, "output", format!("{}: {e}", path.display()))
}
