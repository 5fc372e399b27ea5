use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the stage that raises them. [`Error::category`]
/// collapses them into the coarse classes the command line maps onto exit
/// codes.
#[derive(Debug, Error)]
pub enum Error {
    // linear algebra
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero-norm vector{}", .row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    ZeroVector { row: Option<usize> },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("linear system is singular (regularization {lambda})")]
    SingularSystem { lambda: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),

    // embedding io
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: malformed header {header:?}", .path.display())]
    MalformedHeader { path: PathBuf, header: String },
    #[error("{}:{line}: expected {expected} values, found {found}", .path.display())]
    DimMismatchAtLine {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{}:{line}: cannot parse {value:?} as a float", .path.display())]
    BadFloat {
        path: PathBuf,
        line: usize,
        value: String,
    },
    #[error("{}:{line}: duplicate token {token:?}", .path.display())]
    DuplicateToken {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("token {0:?} has a zero-norm vector")]
    ZeroVectorToken(String),
    #[error("{}: word list is empty", .path.display())]
    EmptyList { path: PathBuf },
    #[error("cache format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("cache checksum does not match its contents")]
    ChecksumFailure,
    #[error("not an embedding cache (bad magic bytes)")]
    BadMagic,
    #[error("truncated cache payload")]
    TruncatedCache,

    // expansion
    #[error("seed {0:?} is not in the lexicon")]
    SeedNotInLexicon(String),
    #[error("lexicon is empty")]
    EmptyLexicon,

    // reduction
    #[error("k = {k} neighbours requested but only {n} points available")]
    KTooLarge { k: usize, n: usize },
    #[error("cannot reduce {dim}-dimensional data to {d} dimensions")]
    DTooLarge { d: usize, dim: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    // clustering
    #[error("need at least 2 points to cluster, got {0}")]
    TooFewPoints(usize),
    #[error("k = {k} is outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("elbow detection needs at least 4 curve points, got {0}")]
    CurveTooShort(usize),
    #[error("distortion curve does not decrease")]
    NonDecreasingCurve,

    // aggregation
    #[error("token {token:?} from language {language:?} has no translation")]
    UnmappedToken { token: String, language: String },
    #[error("token {0:?} is missing from the embedding set")]
    PivotMiss(String),
    #[error("unknown emotion model {0:?}")]
    UnknownModel(String),
    #[error("{}:{line}: {message}", .path.display())]
    MalformedMap {
        path: PathBuf,
        line: usize,
        message: String,
    },

    // evaluation
    #[error("every concept is a model component; nothing to evaluate")]
    EmptyEvaluationSet,
    #[error("need at least 4 concepts, got {0}")]
    TooFewConcepts(usize),
    #[error("requested {size} words but only {available} are available")]
    SizeTooLarge { size: usize, available: usize },

    // annotation analysis
    #[error("missing column {0:?}")]
    MissingColumn(String),
    #[error("row {row}, column {column:?}: value {value:?} is not numeric")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },
    #[error("zero variance; correlation is undefined")]
    ZeroVariance,
    #[error("category {0:?} sits exactly on the projection centre")]
    DegenerateCenterCategory(String),
    #[error("heatmap grid must have at least one cell")]
    EmptyGrid,
    #[error("all heatmap weights are zero")]
    AllZeroWeights,
    #[error("token sets differ: {0}")]
    TokenSetMismatch(String),

    // plotting
    #[error("unknown plot kind {0:?}")]
    UnknownKind(String),
    #[error("malformed plot data: {0}")]
    MalformedData(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse failure classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input data, missing files, unresolvable tokens.
    Data,
    /// A numerical routine could not produce an answer.
    Numeric,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::SingularSystem { .. }
            | Error::NonFinite(_)
            | Error::ZeroVariance
            | Error::ZeroVector { .. } => ErrorCategory::Numeric,
            _ => ErrorCategory::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
