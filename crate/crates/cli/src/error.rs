use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("validation error: {0}")]
    Validation(String),

    /// A solver did not converge, or a numerical target could not be met.
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<ofdm_shaper::Error> for CliError {
    fn from(e: ofdm_shaper::Error) -> Self {
        use ofdm_shaper::Error as E;
        if e.is_solver_failure() {
            return CliError::Solver(e.to_string());
        }
        match e {
            E::Io(io) => CliError::Io(io.to_string()),
            E::Unreachable(_) => CliError::Solver(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
