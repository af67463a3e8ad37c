use thiserror::Error;

use crate::kernel::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state space: {0}")]
    StateSpace(String),

    #[error("invalid kernel schedule: {0}")]
    InvalidSchedule(ValidationReport),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    /// A numeric argument lies outside the domain where the quantity is defined.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("product state space has {states} states, above the cap of {cap}")]
    ProductTooLarge { states: usize, cap: usize },

    #[error("every one of {paths} paths was censored at horizon {horizon}")]
    AllCensored { paths: usize, horizon: usize },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any `Context` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.context(context))
    }
}
