use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("non-monotone time for vehicle {vehicle} at t={t}")]
    NonMonotoneTime { vehicle: String, t: f64 },

    #[error("overtake detected between leader {leader} and follower {follower} at t={t}")]
    Overtake { leader: String, follower: String, t: f64 },

    #[error("no disturbance found in leader speed profile")]
    NoDisturbance,

    #[error("multiple disturbances found in leader speed profile ({0} dips)")]
    MultipleDisturbances(usize),

    #[error("invalid EAB parameters: {0}")]
    InvalidParams(String),

    #[error("non-monotone time mapping on [{t_start}, {t_end}] ({count} samples)")]
    NonMonotoneMapping { t_start: f64, t_end: f64, count: usize },

    #[error("spacing became {spacing:.3} m at t={t}")]
    SpacingCollapse { t: f64, spacing: f64 },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate observation series (all zero)")]
    DegenerateObservation,

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("proposal cap exhausted: {accepted} of {needed} perturbed particles after {proposed} proposals")]
    ProposalCapExhausted {
        accepted: usize,
        needed: usize,
        proposed: usize,
    },

    #[error("degenerate zone: {0}")]
    DegenerateZone(String),

    #[error("config: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
