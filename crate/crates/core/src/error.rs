use thiserror::Error;

/// Errors raised by the estimation and testing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    Symmetry { asymmetry: f64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("at least two groups are required, found {found}")]
    InsufficientGroups { found: usize },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("eigensolver did not converge for eigenvalue {index} within {iterations} iterations")]
    Convergence { index: usize, iterations: usize },

    #[error("rank error: {0}")]
    Rank(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid group pair ({j}, {k}) for {groups} groups; need j < k < groups")]
    Index { j: usize, k: usize, groups: usize },

    /// The variance matrix of a group pair failed the positive-definiteness
    /// check. Group indices are zero-based; `permutation` is set when the
    /// failure happened while evaluating a permuted loading matrix.
    #[error(
        "variance matrix for group pair ({}, {}) is not positive definite{}",
        pair.0,
        pair.1,
        permutation.map(|b| format!(" (permutation {b})")).unwrap_or_default()
    )]
    SingularVariance {
        pair: (usize, usize),
        permutation: Option<usize>,
    },

    #[error("series mapping error: {0}")]
    Mapping(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Symmetry { .. } => "SymmetryError",
            Error::Shape(_) => "ShapeError",
            Error::InsufficientGroups { .. } => "InsufficientGroupsError",
            Error::Input(_) => "InputError",
            Error::Convergence { .. } => "ConvergenceError",
            Error::Rank(_) => "RankError",
            Error::DegenerateInput(_) => "DegenerateInputError",
            Error::Index { .. } => "IndexError",
            Error::SingularVariance { .. } => "SingularVarianceError",
            Error::Mapping(_) => "MappingError",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }
}
