use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("truncation mismatch: {0}")]
    TruncationMismatch(String),
    #[error("jet has zero constant term")]
    ZeroConstantTerm,
    #[error("metric is degenerate at the base point")]
    DegenerateMetric,
    #[error("derivative budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("order violation: {0}")]
    OrderViolation(String),
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("convention violation: {0}")]
    Convention(String),
    #[error("resource guard: {0}")]
    ResourceGuard(String),
    #[error("integration failure: {0}")]
    IntegrationFailure(String),
    #[error("cross-check failure: {0}")]
    CrossCheckFailure(String),
    #[error("quadrature tolerance exceeded: {0}")]
    QuadratureTolerance(String),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbounded symbol: {0}")]
    UnboundedSymbol(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    /// Stable machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(..) => "DimensionMismatch",
            Error::TruncationMismatch(_) => "TruncationMismatch",
            Error::ZeroConstantTerm => "ZeroConstantTerm",
            Error::DegenerateMetric => "DegenerateMetric",
            Error::BudgetExceeded(_) => "BudgetExceeded",
            Error::OrderViolation(_) => "OrderViolation",
            Error::SingularSystem(_) => "SingularSystem",
            Error::Convention(_) => "Convention",
            Error::ResourceGuard(_) => "ResourceGuard",
            Error::IntegrationFailure(_) => "IntegrationFailure",
            Error::CrossCheckFailure(_) => "CrossCheckFailure",
            Error::QuadratureTolerance(_) => "QuadratureTolerance",
            Error::Parse { .. } => "ParseError",
            Error::UnboundedSymbol(_) => "UnboundedSymbol",
            Error::Invalid(_) => "Invalid",
        }
    }

    /// Numeric-tolerance failures map to a distinct CLI exit code.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::IntegrationFailure(_) | Error::QuadratureTolerance(_) | Error::CrossCheckFailure(_))
    }
}
