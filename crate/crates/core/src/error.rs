use thiserror::Error;

use crate::rapg::RunRecord;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs disagree with each other (dimensions, sizes, pairings).
    #[error("configuration error: {0}")]
    Config(String),

    /// A single argument is outside its admissible range.
    #[error("argument error: {0}")]
    Argument(String),

    /// A model or distribution violates one of its invariants.
    #[error("invalid model: {0}")]
    Invalid(String),

    #[error("enumeration would produce {count} trajectories, above the cap of {cap}")]
    Capacity { count: u128, cap: u128 },

    /// No offset makes the mean loss fall to the threshold.
    #[error("infeasible threshold: {0}")]
    InfeasibleThreshold(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    /// RAPG produced a non-finite gradient; the partial run is attached.
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient {
        iteration: usize,
        record: Box<RunRecord>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
