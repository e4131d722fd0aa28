use std::path::PathBuf;

use thiserror::Error;

use crate::estimators::MethodId;

pub type Result<T, E = VimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VimError {
    #[error("column '{column}' has zero variance")]
    DegenerateColumn { column: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("columns '{first}' and '{second}' are identical")]
    DuplicateColumns { first: String, second: String },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("cannot read '{path}': {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("column '{0}' not found")]
    MissingColumn(String),

    #[error("cannot parse '{value}' at row {row}, column '{column}'")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("NaN cell at row {row}, column '{column}'")]
    NanCell { row: usize, column: String },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("non-mean predictors need at least one feature")]
    EmptySubset,

    #[error("loss domain violation: {0}")]
    LossDomain(String),

    #[error("the GLM index needs a fit on standardized covariates; coefficients of unscaled inputs are not comparable")]
    Unstandardized,

    #[error("numerical rank problem: {0}")]
    NumericalRank(String),

    #[error("sampler kind: {0}")]
    SamplerKind(String),

    #[error("insufficient rows: need {needed}, found {found}")]
    InsufficientRows { needed: usize, found: usize },

    #[error("conditional variance of feature {feature} is numerically zero")]
    DegenerateDenominator { feature: usize },

    #[error("problem too large: {0}")]
    Size(String),

    #[error("invalid joint distribution: {0}")]
    InvalidJoint(String),

    #[error("incompatible combination: {0}")]
    Incompatible(String),

    #[error("wilcoxon signed-rank test needs at least 5 nonzero deltas, found {found}; use the sign test instead")]
    InsufficientSample { found: usize },

    #[error("method {0} does not record per-sample contributions")]
    UnsupportedMethod(MethodId),

    #[error("config: {0}")]
    Config(String),

    #[error("{method}: {source}")]
    Method {
        method: MethodId,
        #[source]
        source: Box<VimError>,
    },
}

impl VimError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VimError::InvalidParameter(msg.into())
    }

    pub(crate) fn in_method(self, method: MethodId) -> Self {
        match self {
            e @ VimError::Method { .. } => e,
            other => VimError::Method {
                method,
                source: Box::new(other),
            },
        }
    }
}
