use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] ehbf::Error),

    #[error("cannot write {path}: {reason}")]
    Output { path: String, reason: String },

    #[error("verification failed: {0}")]
    Verification(String),
}

/// Errors caused by the input rather than by a solver.
fn is_input_error(e: &ehbf::Error) -> bool {
    use ehbf::Error::*;
    match e {
        InvalidSchedule(_)
        | InvalidPolicy(_)
        | NegativePower { .. }
        | InvalidConfig(_)
        | ArrivalExceedsCapacity { .. }
        | Csv(_) => true,
        Member { source, .. } => is_input_error(source),
        NoPositiveRoot { .. } | BracketFailure { .. } | NonConvergence { .. } | Infeasible(_) => {
            false
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output { .. } => 1,
            CliError::Core(e) if is_input_error(e) => 1,
            CliError::Core(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}
