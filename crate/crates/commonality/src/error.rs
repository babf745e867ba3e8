use std::fmt;
use std::io;
use std::path::Path;

/// Exit status 1: bad input, configuration or data.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status 2: a file could not be read, written or locked.
pub const EXIT_IO: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
}

/// A stage failure with a one-line reason.
#[derive(Debug)]
pub struct CliError {
    pub kind: ErrorKind,
    pub stage: &'static str,
    pub reason: String,
}

impl CliError {
    pub fn validation(stage: &'static str, reason: impl fmt::Display) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            stage,
            reason: one_line(reason.to_string()),
        }
    }

    pub fn io(stage: &'static str, path: &Path, err: impl fmt::Display) -> Self {
        CliError {
            kind: ErrorKind::Io,
            stage,
            reason: one_line(format!("{}: {err}", path.display())),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => EXIT_VALIDATION,
            ErrorKind::Io => EXIT_IO,
        }
    }

    /// `{"error":"validation","stage":"verify","reason":"..."}`
    pub fn to_json_line(&self) -> String {
        let kind = match self.kind {
            ErrorKind::Validation => "validation",
            ErrorKind::Io => "io",
        };
        serde_json::json!({ "error": kind, "stage": self.stage, "reason": self.reason }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} error in {}: {}",
            if self.kind == ErrorKind::Io {
                "I/O"
            } else {
                "validation"
            },
            self.stage,
            self.reason
        )
    }
}

impl std::error::Error for CliError {}

fn one_line(s: String) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches a stage and path to IO results.
pub trait IoContext<T> {
    fn at(self, stage: &'static str, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, stage: &'static str, path: &Path) -> Result<T> {
        self.map_err(|e| CliError::io(stage, path, e))
    }
}

/// Maps domain errors to validation failures.
pub trait Invalid<T> {
    fn invalid(self, stage: &'static str) -> Result<T>;
}

impl<T, E: fmt::Display> Invalid<T> for std::result::Result<T, E> {
    fn invalid(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| CliError::validation(stage, e))
    }
}
