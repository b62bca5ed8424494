use std::fmt;
use std::path::Path;

use grassframe::Error;

/// Process exit codes: 2 for rejected input, 3 when a valid run fails.
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => EXIT_INVALID,
            Failure::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        Failure::Invalid(msg.into())
    }

    pub fn write(path: &Path, err: std::io::Error) -> Self {
        Failure::Runtime(format!("cannot write {}: {err}", path.display()))
    }

    pub fn read(path: &Path, err: std::io::Error) -> Self {
        Failure::Invalid(format!("cannot read {}: {err}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(msg) | Failure::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        match err {
            Error::Domain(_) | Error::ZeroColumn { .. } | Error::Schema(_) => {
                Failure::Invalid(err.to_string())
            }
            Error::Divergence { .. } | Error::Io(_) => Failure::Runtime(err.to_string()),
        }
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;
