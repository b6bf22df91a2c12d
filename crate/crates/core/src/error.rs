use thiserror::Error;

use crate::market::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage an error originated from; used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    NoArbitrage,
    Solver,
    DegenerateDual,
    Certificate,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed event tree: {0}")]
    Tree(String),

    #[error("scenario failed validation: {0}")]
    Validation(ValidationReport),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size guard exceeded: {what} is {actual}, limit {limit}")]
    SizeGuard {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("no supermartingale measure with full support (arbitrage under the cone constraint)")]
    NoArbitrage,

    #[error("{stage} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("dual optimizer degenerate on support of mu: density vanishes at charged node {node}")]
    DegenerateDual { node: usize },

    #[error("consumption plan is not financeable: shortfall {shortfall:.3e} at node {node}")]
    NotFinanceable { node: usize, shortfall: f64 },

    #[error("utility envelope violated at node {node}, x = {x:e}: {detail}")]
    Envelope { node: usize, x: f64, detail: String },

    #[error("unknown utility family '{0}'")]
    UnknownFamily(String),

    #[error("unknown scenario builder '{0}'")]
    UnknownBuilder(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal consistency failure: {0}")]
    Internal(String),
}

impl Error {
    pub fn stage(&self) -> Stage {
        match self {
            Error::Tree(_)
            | Error::Validation(_)
            | Error::Dimension { .. }
            | Error::InvalidArgument(_)
            | Error::SizeGuard { .. }
            | Error::Envelope { .. }
            | Error::UnknownFamily(_)
            | Error::UnknownBuilder(_)
            | Error::Parse { .. }
            | Error::Io { .. } => Stage::Input,
            Error::NoArbitrage => Stage::NoArbitrage,
            Error::NoConvergence { .. } => Stage::Solver,
            Error::DegenerateDual { .. } => Stage::DegenerateDual,
            Error::NotFinanceable { .. } | Error::Certificate(_) => Stage::Certificate,
            Error::Internal(_) => Stage::Internal,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
