use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GoldError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid action set: {0}")]
    InvalidSet(String),

    #[error("no interior: {0}")]
    NoInterior(String),

    #[error("safety ball not contained in the action set: {0}")]
    SafetyBallOutside(String),

    #[error("infeasible sampling radius {radius} (safety radius is {safety_radius})")]
    InfeasibleRadius { radius: f64, safety_radius: f64 },

    #[error("schedule exhausted at t = {0}")]
    ScheduleExhausted(u64),

    #[error("invalid delay schedule: {0}")]
    InvalidDelay(String),

    #[error("duplicate origin {0} enqueued")]
    DuplicateOrigin(u64),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid game: {0}")]
    InvalidGame(String),

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("round {round}: {source}")]
    AtRound {
        round: u64,
        #[source]
        source: Box<GoldError>,
    },
}

impl GoldError {
    pub fn at_round(self, round: u64) -> Self {
        match self {
            e @ GoldError::AtRound { .. } => e,
            e => GoldError::AtRound {
                round,
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = GoldError> = std::result::Result<T, E>;
