use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A fractional point has more strictly fractional coordinates than the
    /// exact evaluator accepts.
    #[error("fractional support {support} exceeds the exact-evaluation limit {limit}")]
    Capacity { support: usize, limit: usize },

    /// An exhaustive routine was asked to run on a ground set that is too big.
    #[error("{what} supports at most {limit} elements, instance has {n}")]
    TooLarge {
        what: &'static str,
        n: usize,
        limit: usize,
    },

    /// Guess enumeration would produce more sequences than allowed. `count` is
    /// `None` when the count does not fit in a u128.
    #[error("guess enumeration would produce {} sequences (limit {limit}); use the practical or analysis-guided mode", display_count(.count))]
    EnumerationLimit { count: Option<u128>, limit: u128 },

    #[error("guess protocol violation: {0}")]
    Protocol(String),

    #[error("infeasible state: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn display_count(count: &Option<u128>) -> String {
    match count {
        Some(c) => c.to_string(),
        None => "more than 2^128".to_string(),
    }
}

impl Error {
    /// True for the refusals caused by instance or enumeration size rather than
    /// by malformed input.
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::Capacity { .. } | Error::TooLarge { .. } | Error::EnumerationLimit { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
