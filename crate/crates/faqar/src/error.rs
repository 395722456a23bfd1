//! Error taxonomy shared across the crate.
//!
//! Errors split into two broad families, and the CLI maps them onto exit
//! codes:
//!
//! * usage errors (bad parameters, malformed input data, misaligned series)
//!   abort before any numerical work starts: exit code 2;
//! * numerical errors (rank deficiency, solver non-convergence) arise during
//!   estimation: exit code 3.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data could not be loaded or failed validation.
    #[error("invalid input data: {0}")]
    Load(String),

    /// Two time-indexed inputs do not share the same period index.
    #[error("misaligned inputs: {0}")]
    Alignment(String),

    /// A design or panel matrix is rank deficient where full rank is required.
    #[error("rank deficiency: {0}")]
    Singular(String),

    /// An iterative routine failed to converge or produced non-finite values.
    #[error("numerical failure: {0}")]
    Numeric(String),

    /// Filesystem failure while reading inputs or writing outputs.
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),

    /// Malformed delimited input.
    #[error("csv failure: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code the CLI reports for this error.
    ///
    /// Usage and data problems map to 2, numerical failures to 3.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) | Error::Load(_) | Error::Alignment(_) => 2,
            Error::Io(_) | Error::Csv(_) => 2,
            Error::Singular(_) | Error::Numeric(_) => 3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_split_usage_from_numerical() {
        assert_eq!(Error::Parameter("k".into()).exit_code(), 2);
        assert_eq!(Error::Load("panel".into()).exit_code(), 2);
        assert_eq!(Error::Alignment("periods".into()).exit_code(), 2);
        assert_eq!(Error::Singular("design".into()).exit_code(), 3);
        assert_eq!(Error::Numeric("no convergence".into()).exit_code(), 3);
    }

    #[test]
    fn messages_name_the_failing_piece() {
        let err = Error::Load("missing value for series infl at period 1991Q2".into());
        let text = err.to_string();
        assert!(text.contains("infl"));
        assert!(text.contains("1991Q2"));
    }
}
