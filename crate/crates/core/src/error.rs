use thiserror::Error;

/// Errors raised by the toolkit.
///
/// The variants are grouped by the stage that produces them so the CLI can
/// map every precondition failure onto a single exit status.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("point {x} outside the domain of {system}")]
    Domain { system: String, x: f64 },

    #[error("orbit did not return to the base set within {iterates} iterates")]
    NonReturn { iterates: u64 },

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("infinite moment: {0}")]
    InfiniteMoment(String),

    #[error("coboundary series diverges: partial sums reached {reached:.3e} (limit {limit:.3e})")]
    NoGap { reached: f64, limit: f64 },

    #[error("degenerate variance: {0}")]
    Degenerate(String),

    #[error("integration did not converge: {0}")]
    Integration(String),

    #[error("no collision within flight time {cap}")]
    HorizonEscape { cap: f64 },

    #[error("invalid table: {0}")]
    Table(String),
}

pub type Result<T> = std::result::Result<T, Error>;
