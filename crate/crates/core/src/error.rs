use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid model: {}", .0.join("; "))]
    InvalidModel(Vec<String>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("cell ({row},{col}) lies outside the {rows}x{cols} grid")]
    CellOutOfGrid {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("models are not nested: {0}")]
    NotNested(String),

    #[error("fitted value is zero at cell ({row},{col}) where the observed count is positive")]
    ZeroFitted { row: usize, col: usize },

    #[error("statistic returned a non-finite value ({value}) at step {step}")]
    NonFiniteStatistic { value: f64, step: usize },

    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),

    #[error("fiber enumeration exceeded the cap of {cap} members")]
    FiberOverflow { cap: usize },

    #[error("polynomial reduction exceeded {0} steps")]
    ReductionLimit(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidTable(_) => "invalid_table",
            Error::InvalidModel(_) => "invalid_model",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::CellOutOfGrid { .. } => "cell_out_of_grid",
            Error::NotNested(_) => "not_nested",
            Error::ZeroFitted { .. } => "zero_fitted",
            Error::NonFiniteStatistic { .. } => "non_finite_statistic",
            Error::InvalidChain(_) => "invalid_chain",
            Error::FiberOverflow { .. } => "fiber_overflow",
            Error::ReductionLimit(_) => "reduction_limit",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
