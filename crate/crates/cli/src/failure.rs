use std::fmt;
use std::io;

use demandwave::Error;

/// Error with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub const CONFIG: i32 = 3;
    pub const MISSING: i32 = 4;
    pub const DATA: i32 = 5;
    pub const DIMENSION: i32 = 6;
    pub const IO: i32 = 7;

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, kind: "config", message: message.into() }
    }

    pub fn missing(message: impl Into<String>) -> Self {
        Self { code: Self::MISSING, kind: "missing input", message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: Self::DATA, kind: "malformed input", message: message.into() }
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        Self { code: Self::DIMENSION, kind: "dimension mismatch", message: message.into() }
    }

    /// Opening an input file: a missing file gets its own code.
    pub fn open(path: &std::path::Path, e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::NotFound {
            Self::missing(format!("{}: no such file", path.display()))
        } else {
            Self { code: Self::IO, kind: "io", message: format!("{}: {e}", path.display()) }
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self { code: Self::IO, kind: "io", message: e.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Io(e) => e.into(),
            Error::Csv(_) | Error::Header { .. } | Error::Row { .. } | Error::Format(_) => Self::data(message),
            Error::UnknownBank(_) | Error::Threshold(_) => Self::config(message),
            _ => Self::dimension(message),
        }
    }
}
