use thiserror::Error;

use crate::reduction::Rule4Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("GridTooCoarse: pulse width {sigma} is below two grid spacings ({spacing})")]
    GridTooCoarse { sigma: f64, spacing: f64 },

    #[error("CenterOutOfRange: center {center} outside grid [{lo}, {hi})")]
    CenterOutOfRange { center: f64, lo: f64, hi: f64 },

    #[error("EdgeClearance: pulse at {center} with width {sigma} needs 4 widths of clearance inside [{lo}, {hi})")]
    EdgeClearance { center: f64, sigma: f64, lo: f64, hi: f64 },

    #[error("GridMismatch: operands live on different brain grids")]
    GridMismatch,

    #[error("IndexOutOfRange: index {index} outside 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("ZeroProfile: amplitude profile has no weight to normalize")]
    ZeroProfile,

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("StepTooCoarse: dt {dt} exceeds the resolution limit {max}")]
    StepTooCoarse { dt: f64, max: f64 },

    #[error("PhantomTransfer: schedule routes current through phantom term {term}")]
    PhantomTransfer { term: usize },

    #[error("Rule4Violation: {} forbidden ready-to-ready transfer(s), first {:?}", .0.len(), .0.first())]
    Rule4Violation(Vec<Rule4Violation>),

    #[error("HitRateTooHigh: per-step hit probability {p} exceeds {max}")]
    HitRateTooHigh { p: f64, max: f64 },

    #[error("NonpositiveS: reference square modulus {0} must be positive")]
    NonpositiveS(f64),

    #[error("NotPostReduction: {0}")]
    NotPostReduction(String),

    #[error("NotFullyFormed: {0}")]
    NotFullyFormed(String),

    #[error("NotHitTarget: term {0} is not a live ready component")]
    NotHitTarget(usize),

    #[error("ZeroWeightSite: term {term} has no weight at site {site}")]
    ZeroWeightSite { term: usize, site: usize },

    #[error("TooFewTrials: {n} trials, at least {min} required")]
    TooFewTrials { n: usize, min: usize },

    #[error("TooFewEvents: {n} events, at least {min} required")]
    TooFewEvents { n: usize, min: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("invariant breach [{invariant}]: {detail}")]
    InvariantBreach { invariant: &'static str, detail: String },
}

impl Error {
    /// True for errors raised while a trajectory is running, as opposed to
    /// malformed inputs that are rejected up front.
    pub fn is_runtime(&self) -> bool {
        matches!(
            self,
            Error::PhantomTransfer { .. }
                | Error::Rule4Violation(_)
                | Error::InvariantBreach { .. }
                | Error::NotPostReduction(_)
                | Error::NotFullyFormed(_)
                | Error::ZeroWeightSite { .. }
                | Error::NotHitTarget(_)
        )
    }
}
