use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("carrier index {index} out of range for {n_carriers} carriers")]
    CarrierOutOfRange { index: usize, n_carriers: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid band: {0}")]
    Band(String),

    #[error("invalid carrier plan: {0}")]
    Plan(String),

    #[error("solver did not converge after {iterations} iterations (projected gradient norm {gradient_norm:.3e})")]
    NoConvergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<num_complex::Complex64>,
    },

    #[error("multiplier bracket failure: {0}")]
    Bracket(String),

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("carrier {carrier}: {source}")]
    Carrier {
        carrier: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("insufficient samples: need at least {required}, got {actual}")]
    InsufficientSamples { required: usize, actual: usize },

    #[error("target unreachable: {0}")]
    Unreachable(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_carrier(self, carrier: usize) -> Self {
        Error::Carrier {
            carrier,
            source: Box::new(self),
        }
    }

    /// True for failures raised by the numerical solvers, as opposed to
    /// malformed inputs.
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::NoConvergence { .. } | Error::Bracket(_) | Error::LinearAlgebra(_) => true,
            Error::Carrier { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }
}
