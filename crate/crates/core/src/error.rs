//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or operation was handed parameters outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The (M, s, N_t) combination admits no feasible placement, or a
    /// requested placement does not fit on the grid.
    #[error("infeasible instance: {0}")]
    Infeasible(String),

    /// A 1-based position or subcarrier index fell outside its range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// MRT direction is undefined for a zero channel vector carrying power.
    #[error("zero channel vector with positive power on subcarrier {subcarrier}")]
    ZeroChannelVector { subcarrier: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}
