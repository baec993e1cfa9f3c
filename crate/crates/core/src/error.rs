use thiserror::Error;

use crate::grid::Representation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("degenerate state")]
    DegenerateState,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("operation requires the {expected} representation")]
    WrongRepresentation { expected: Representation },
    #[error("kernel requires positive time")]
    NonPositiveTime,
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(
        "slice time {epsilon} is below the grid resolution limit {limit}; use fewer slices or more points"
    )]
    UnderResolved { epsilon: f64, limit: f64 },
    #[error("detector element {0} does not exist")]
    NoSuchElement(usize),
    #[error("detector already fired element {0}; one registration per run")]
    AlreadyFired(usize),
    #[error("element {0} is marked fired but has no firing time")]
    MissingFiringTime(usize),
    #[error("detector elements {0} and {1} overlap on the grid")]
    OverlappingElements(usize, usize),
    #[error("non-finite rate field")]
    NonFiniteRate,
    #[error("state annihilated or diverged; reduce dt·G")]
    Annihilated,
    #[error("state misses detector")]
    MissesDetector,
    #[error("state annihilated: no probability inside the measurement window")]
    EmptyWindow,
    #[error("continuity residual needs at least 3 consecutive states, got {0}")]
    SeriesTooShort(usize),
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

pub(crate) fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {value}"),
        })
    }
}
