use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}{}", context_suffix(.context))]
    DimensionMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
        context: String,
    },

    #[error("non-finite value at ({row},{col}){}", context_suffix(.context))]
    NonFinite {
        row: usize,
        col: usize,
        context: String,
    },

    #[error("corpus needs at least 3 groups for triple constraints, got {0}")]
    TooFewGroups(usize),

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("rank condition violated: n = {n} < max(n_f,n_t)/min(n_f,n_t) = {required}")]
    RankCondition { n: usize, required: usize },

    #[error("matrix is not positive definite{}", context_suffix(.0))]
    NotPositiveDefinite(String),

    #[error("no between-group signal: all eigenvalues are zero")]
    NoSignal,

    #[error("cross-covariance divisor degenerate: need at least 2 words, got {0}")]
    DegenerateDivisor(usize),

    #[error("component index {index} out of range (have {len})")]
    ComponentOutOfRange { index: usize, len: usize },

    #[error("basis matrix is singular; cannot reverse the projection")]
    SingularBasis,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn context_suffix(context: &str) -> String {
    if context.is_empty() {
        String::new()
    } else {
        format!(" in {context}")
    }
}

pub type Result<T> = core::result::Result<T, Error>;
