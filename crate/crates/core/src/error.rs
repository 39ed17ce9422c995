use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    /// A caller-side argument is out of its domain.
    Argument(String),
    /// A precondition of the operation does not hold.
    Contract(String),
    /// A token or label is not in the vocabulary in use.
    UnknownToken(String),
    /// A token id is outside the vocabulary.
    TokenOutOfRange { id: usize, vocab: usize },
    /// A record or dataset is inconsistent with the model dimensions.
    Mismatch(String),
    /// Training produced a non-finite loss.
    Divergence { epoch: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, left, right } => {
                write!(f, "{op}: dimension mismatch between {left:?} and {right:?}")
            }
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Contract(msg) => write!(f, "contract violated: {msg}"),
            Error::UnknownToken(tok) => write!(f, "unknown token {tok:?}"),
            Error::TokenOutOfRange { id, vocab } => {
                write!(f, "token id {id} out of range for vocabulary of {vocab}")
            }
            Error::Mismatch(msg) => write!(f, "mismatch: {msg}"),
            Error::Divergence { epoch } => write!(f, "non-finite loss in epoch {epoch}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn dim_err(op: &'static str, left: &[usize], right: &[usize]) -> Error {
    Error::Dimension {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}
