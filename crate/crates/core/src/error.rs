use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("degree {degree} exceeds the configured maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("charts differ")]
    ChartMismatch,

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("bidegree ({p},{q}) does not fit in dimension {n}")]
    BidegreeOverflow { p: usize, q: usize, n: usize },

    #[error("expected a form of bidegree ({expected_p},{expected_q}), got ({p},{q})")]
    WrongBidegree {
        expected_p: usize,
        expected_q: usize,
        p: usize,
        q: usize,
    },

    #[error("singular node {node} inside a finite-difference stencil and no analytic derivatives available")]
    SingularStencil { node: usize },

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("rank mismatch: expected {expected}, got {got}")]
    RankMismatch { expected: usize, got: usize },

    #[error("inversion requested at flagged (degenerate) node {node}")]
    FlaggedNode { node: usize },

    #[error("metric is not smooth: {0}")]
    NotSmooth(String),

    #[error("fiber quadrature not calibrated: error {error:e} exceeds tolerance {tolerance:e}")]
    NotCalibrated { error: f64, tolerance: f64 },

    #[error("regularization parameter {eps} too large for chart margin {margin}")]
    EpsTooLarge { eps: f64, margin: f64 },

    #[error("codimension of the degeneracy locus ({codim}) is below the current degree {k}; this requirement can not be relaxed in general")]
    Codimension { codim: usize, k: usize },

    #[error("bump support exceeds the chart")]
    SupportOutsideChart,

    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("chart transition inconsistency {residual:e} exceeds {tolerance:e}")]
    Transition { residual: f64, tolerance: f64 },

    #[error("fiber vector is zero")]
    ZeroFiberVector,

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
