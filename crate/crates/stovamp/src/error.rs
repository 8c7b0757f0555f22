//! One error type for the whole crate, plus the exit-code mapping the
//! command-line front end uses.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A vector or matrix had the wrong length for the requested operation.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A parameter violated its domain (non-positive precision, empty
    /// vector, and so on).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An experiment configuration could not be parsed or validated.
    #[error("config error: {0}")]
    Config(String),

    /// The solver state stopped being finite; carries the first offending
    /// quantity and where it appeared.
    #[error("numeric abort at iteration {iteration}, block {block}: {what} is not finite")]
    NonFinite {
        what: &'static str,
        iteration: usize,
        block: usize,
    },

    /// A mathematical invariant of the iteration broke (for example the
    /// information-monotonicity of the linear estimation step).
    #[error("numeric abort at iteration {iteration}, block {block}: {what}")]
    Invariant {
        what: &'static str,
        iteration: usize,
        block: usize,
    },

    /// An operation was asked of an operator that does not support it.
    #[error("operator capability missing: {0}")]
    Capability(&'static str),

    /// A byte-level problem in an input file (PGM, trace), with the offset
    /// where parsing stopped making sense.
    #[error("format error in {path} at byte {offset}: {what}")]
    Format {
        path: String,
        offset: usize,
        what: String,
    },

    /// Plain I/O failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end: 2 for anything wrong
    /// with the inputs (config, file formats, I/O, preconditions), 3 for a
    /// numeric abort mid-run, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::Format { .. }
            | Error::Io { .. }
            | Error::Precondition(_) => 2,
            Error::NonFinite { .. } | Error::Invariant { .. } => 3,
            _ => 1,
        }
    }
}
