use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric: max |a_ij - a_ji| = {deviation:e}")]
    Asymmetric { deviation: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("symmetric eigensolver did not converge on a {size}x{size} matrix")]
    NoConvergence { size: usize },

    #[error("matrix has an all-zero spectrum; pseudo-inverse square root is undefined")]
    ZeroRank,

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPsd { eigenvalue: f64 },

    #[error(
        "matrix is not positive definite (min eigenvalue {min_eigenvalue:e}, max {max_eigenvalue:e}); add regularization"
    )]
    IllConditioned {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("tuple arity mismatch: expected {expected}, got {actual}")]
    Arity { expected: usize, actual: usize },

    #[error("tuple width mismatch: expected {expected} features, got {actual}")]
    Width { expected: usize, actual: usize },

    #[error("bad label: {0}")]
    BadLabel(String),

    #[error("cannot build tuples: class {class} has a single member")]
    InfeasiblePairs { class: i64 },

    #[error("labels are degenerate: {0}")]
    DegenerateLabels(String),

    #[error("class {class} has {size} members but {k} target neighbors need at least {}", k + 1)]
    InfeasibleNeighbors { class: i64, size: usize, k: usize },

    #[error("class {class} has a single member")]
    DegenerateClass { class: i64 },

    #[error("no chunklet with at least two members")]
    NoConstraints,

    #[error("n_components = {n_components} < n_features = {n_features}; this learner does not reduce dimension")]
    UnsupportedReduction {
        n_components: usize,
        n_features: usize,
    },

    #[error("constraints are degenerate: {0}")]
    DegenerateConstraints(String),

    #[error("distance bounds are infeasible: upper {upper:e} >= lower {lower:e}; try different percentiles")]
    InfeasibleBounds { upper: f64, lower: f64 },

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("model has no threshold; calibrate it or set one manually")]
    UnsetThreshold,

    #[error("metric {metric} is undefined: {reason}")]
    UndefinedMetric { metric: String, reason: String },

    #[error("fold {fold} is degenerate: {reason}")]
    FoldDegenerate { fold: usize, reason: String },

    #[error("candidate {index} ({params}): {source}")]
    Candidate {
        index: usize,
        params: String,
        source: Box<Error>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn dim(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }

    /// Failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::Numerical(_) | Error::IllConditioned { .. } => true,
            Error::Candidate { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
