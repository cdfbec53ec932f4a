use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a type invariant.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// π̂(t) reached 1 somewhere a division by 1 − π̂(t) is required.
    #[error("degenerate regime: P[Bin({t}, p) >= r] = 1, so 1 - pi_hat(t) vanishes")]
    DegenerateRegime { t: u64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("trace too short: process stopped at T = {stop} but step {needed} was required")]
    TraceTooShort { stop: u64, needed: u64 },

    #[error("malformed edge list at line {line}: {msg}")]
    EdgeList { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
