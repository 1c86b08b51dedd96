//! Failure classes shared by the CLI (exit codes) and the HTTP API.

use std::fmt;

use ncb_core::classifier::ClassifierError;
use ncb_core::corpus::{CorpusError, FitError, ReadCorpusError};
use ncb_core::encoding::io::EncodingIoError;
use ncb_core::encoding::EncodingError;
use ncb_core::inspection::InspectionError;
use ncb_core::revision::RevisionError;
use ncb_core::sudoku::SudokuError;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorClass {
    /// Files could not be read or written.
    Io,
    /// Input parsed badly or broke a format invariant.
    Validation,
    /// Input was well formed but the requested operation is not allowed.
    Domain,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Io => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Domain => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl fmt::Display) -> Self {
        CliError {
            class: ErrorClass::Io,
            message: message.to_string(),
        }
    }

    pub fn validation(message: impl fmt::Display) -> Self {
        CliError {
            class: ErrorClass::Validation,
            message: message.to_string(),
        }
    }

    pub fn domain(message: impl fmt::Display) -> Self {
        CliError {
            class: ErrorClass::Domain,
            message: message.to_string(),
        }
    }

    /// Prefixes the message, e.g. with the offending path.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    /// The machine-readable payload written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            class: ErrorClass,
            exit_code: i32,
            message: &'a str,
        }
        #[derive(Serialize)]
        struct Payload<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Payload {
            error: Body {
                class: self.class,
                exit_code: self.class.exit_code(),
                message: &self.message,
            },
        })
        .expect("error payload serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e)
    }
}

impl From<EncodingIoError> for CliError {
    fn from(e: EncodingIoError) -> Self {
        match e {
            EncodingIoError::Io(io) => CliError::io(io),
            other => CliError::validation(other),
        }
    }
}

impl From<EncodingError> for CliError {
    fn from(e: EncodingError) -> Self {
        CliError::validation(e)
    }
}

impl From<ReadCorpusError> for CliError {
    fn from(e: ReadCorpusError) -> Self {
        match e {
            ReadCorpusError::Io(io) => CliError::io(io),
            ReadCorpusError::Corpus(c) => CliError::validation(c),
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::domain(e)
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        CliError::domain(e)
    }
}

impl From<RevisionError> for CliError {
    fn from(e: RevisionError) -> Self {
        match e {
            RevisionError::Schema(_) => CliError::validation(e),
            other => CliError::domain(other),
        }
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        CliError::domain(e)
    }
}

impl From<InspectionError> for CliError {
    fn from(e: InspectionError) -> Self {
        CliError::domain(e)
    }
}

impl From<SudokuError> for CliError {
    fn from(e: SudokuError) -> Self {
        match e {
            SudokuError::Io(io) => CliError::io(io),
            SudokuError::EncodingIo(inner) => inner.into(),
            SudokuError::Format(_) | SudokuError::InvalidConfig(_) => CliError::validation(e),
            other => CliError::domain(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
