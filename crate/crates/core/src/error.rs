use thiserror::Error;

/// Errors raised anywhere in the forward/inverse pipeline.
///
/// Variants are grouped by the stage that raises them; [`Error::exit_code`]
/// maps each group to the CLI exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("edge {edge} hits its Dirichlet spectrum at lambda = {lambda} (|s| = {s:e})")]
    EdgeSpectrumHit { edge: String, lambda: f64, s: f64 },

    #[error("lambda = {lambda} is (numerically) an interior Dirichlet eigenvalue: condition estimate {condition:e}")]
    InteriorSpectrumHit { lambda: f64, condition: f64 },

    #[error("D-N conversion is degenerate at lambda = {0} (sin(sqrt(lambda)) = 0)")]
    ConversionDegenerate(f64),

    #[error("partial-data sub-block is rank deficient at lambda = {lambda} (sigma_min/sigma_max = {ratio:e})")]
    UniquenessViolation { lambda: f64, ratio: f64 },

    #[error("inconsistent data at lambda = {lambda}: relative residual {residual:e}")]
    Inconsistency { lambda: f64, residual: f64 },

    #[error("Cauchy descent underdetermined at lambda = {lambda}: line point {point} not identifiable")]
    DescentUnderdetermined { lambda: f64, point: usize },

    #[error("ratio singular at line position {position} (lambda = {lambda}, |u| = {value:e})")]
    RatioSingular { lambda: f64, position: usize, value: f64 },

    #[error("no background anchor edge in chain")]
    AnchorMissing,

    #[error("support cannot be resolved by the available line families: {0} edge(s) left")]
    SupportUnresolvable(usize),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error("Borg inversion did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("spectrum inconsistent with band-limited symmetric model (misfit {misfit:e})")]
    ModelMismatch { misfit: f64 },

    #[error("dataset does not cover required lambda values: {missing:?}")]
    Coverage { missing: Vec<f64> },

    #[error("no admissible lambda in grid")]
    EmptyDataset,

    #[error("stage '{stage}' failed (stage index {stage_index}, lambda {lambda:?}): {source}")]
    Stage {
        stage: String,
        stage_index: usize,
        lambda: Option<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// CLI exit status: 2 validation, 3 numeric failure, 4 coverage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_)
            | Error::Validation(_)
            | Error::Parse(_)
            | Error::SupportUnresolvable(_) => 2,
            Error::Coverage { .. } => 4,
            Error::Io(_) => 1,
            Error::Stage { source, .. } => source.exit_code(),
            _ => 3,
        }
    }

    /// Wrap an error with the reconstruction stage that produced it.
    pub fn at_stage(self, stage: &str, stage_index: usize, lambda: Option<f64>) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            stage_index,
            lambda,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
