use thiserror::Error;

/// Errors raised across estimation, simulation and model checking.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("value out of range: {0}")]
    Range(String),

    #[error("degenerate range: {0}")]
    DegenerateRange(String),

    #[error("parameter outside its domain: {0}")]
    Domain(String),

    #[error("numerical degeneracy: {message} (parameters {params:?})")]
    NumericalDegeneracy { message: String, params: Vec<f64> },

    #[error("objective is non-finite on more than half of the initial population ({failed}/{total})")]
    DegenerateObjective { failed: usize, total: usize },

    #[error("objective is non-finite at the starting point")]
    InvalidStart,

    #[error("estimation failed for every start: {}", .diagnostics.join("; "))]
    EstimationFailed { diagnostics: Vec<String> },

    #[error("spatial sampler saturated after {attempts} rejections (alpha2={alpha2}, beta2={beta2})")]
    Saturation { attempts: u64, alpha2: f64, beta2: f64 },

    #[error("simulation budget exceeded: {0}")]
    Budget(String),

    #[error("simulation degeneracy: {0}")]
    SimulationDegeneracy(String),

    #[error("feature mismatch (missing: {missing:?}, extra: {extra:?})")]
    FeatureMismatch { missing: Vec<String>, extra: Vec<String> },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            2
        } else {
            1
        }
    }

    /// Whether the error stems from numerics rather than from user input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalDegeneracy { .. }
                | Error::DegenerateObjective { .. }
                | Error::InvalidStart
                | Error::EstimationFailed { .. }
                | Error::Saturation { .. }
                | Error::Budget(_)
                | Error::SimulationDegeneracy(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
