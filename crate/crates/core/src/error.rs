use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Validation and capacity failures raised by the core operations.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    NonFinite { row: Option<usize>, index: usize },
    ZeroDimension,
    Empty(&'static str),
    NotBinary { index: usize, value: f64 },
    DuplicateId(String),
    InvalidParameter(String),
    Capacity(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::NonFinite { row: Some(row), index } => {
                write!(f, "non-finite value at row {row}, index {index}")
            }
            Error::NonFinite { row: None, index } => write!(f, "non-finite value at index {index}"),
            Error::ZeroDimension => f.write_str("vectors must have at least one dimension"),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::NotBinary { index, value } => {
                write!(f, "mask entry {index} is {value}, expected 0 or 1")
            }
            Error::DuplicateId(id) => write!(f, "duplicate row id {id:?}"),
            Error::InvalidParameter(msg) => f.write_str(msg),
            Error::Capacity(msg) => write!(f, "capacity exceeded: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Attach a row number to a [`Error::NonFinite`] raised while validating one vector.
    pub fn in_row(self, row: usize) -> Self {
        match self {
            Error::NonFinite { index, .. } => Error::NonFinite { row: Some(row), index },
            other => other,
        }
    }
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
