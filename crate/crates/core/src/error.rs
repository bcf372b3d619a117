use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("negative power {value} in epoch {epoch}")]
    NegativePower { epoch: usize, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("arrival {index} of {energy} J exceeds the storage capacity {e_max} J")]
    ArrivalExceedsCapacity { index: usize, energy: f64, e_max: f64 },

    #[error("no positive root of the dual cubic for p_h = {p_h}, b = {b}")]
    NoPositiveRoot { p_h: f64, b: f64 },

    #[error("dual bracket [{low}, {high}] does not contain the BO budget {budget} J")]
    BracketFailure { low: f64, high: f64, budget: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("ensemble member {member} (seed {seed}) failed: {source}")]
    Member {
        seed: u64,
        member: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("csv output failed: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
