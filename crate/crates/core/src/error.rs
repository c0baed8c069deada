use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid domain [{lower}, {upper}]: upper must exceed lower and both must be finite")]
    InvalidDomain { lower: f64, upper: f64 },

    #[error("subject {subject}: {reason}")]
    InvalidSample { subject: String, reason: String },

    #[error("subject {subject}: duplicate observation time {time}")]
    DuplicateTime { subject: String, time: f64 },

    #[error("duplicate subject id {0}")]
    DuplicateSubject(String),

    #[error("at least 2 subjects are required, got {0}")]
    TooFewSubjects(usize),

    #[error("subject {subject}: time {time} outside domain [{lower}, {upper}]")]
    OutOfDomain {
        subject: String,
        time: f64,
        lower: f64,
        upper: f64,
    },

    #[error("grid needs at least 2 points, got {0}")]
    InvalidGrid(usize),

    #[error("grids do not match")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("bandwidth {bandwidth} too small: no local data at {location}")]
    BandwidthTooSmall { bandwidth: f64, location: String },

    #[error("no feasible bandwidth among candidates: {}", .0.join("; "))]
    NoFeasibleBandwidth(Vec<String>),

    #[error("surface is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("no usable subjects (every subject has at most {truncation} observations)")]
    NoUsableSubjects { truncation: usize },

    #[error("scores for subject {0} are not usable")]
    UnusableScores(String),
}

impl Error {
    /// True for failures of the numerical procedure itself rather than
    /// malformed inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::BandwidthTooSmall { .. }
                | Error::NoFeasibleBandwidth(_)
                | Error::NotSymmetric(_)
                | Error::NonFinite(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
