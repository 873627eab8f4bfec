use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Input data does not meet the preconditions of a fit.
    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

/// A problem with a single line of CSV input.
#[derive(Debug, Clone, PartialEq)]
pub struct LineIssue {
    /// 1-based line number in the input, the header being line 1.
    pub line: u64,
    pub message: String,
}

/// CSV input that could not be parsed. Every offending line is listed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("failed to parse input ({} problem line(s); first at line {}: {})",
    .issues.len(),
    .issues.first().map(|i| i.line).unwrap_or(0),
    .issues.first().map(|i| i.message.as_str()).unwrap_or(""))]
pub struct ParseError {
    pub issues: Vec<LineIssue>,
}
