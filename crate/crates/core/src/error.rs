use crate::lattice::LatticeSite;
use crate::standing::Branch;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid frequency {p}/{q}: {reason}")]
    InvalidFrequency { p: u64, q: u64, reason: &'static str },

    #[error("amplitude expression a0^-2 = {value} is not positive; this site seeds no straight pair")]
    NonPositiveAmplitude { value: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("truncation mismatch: ({0}, {1}) vs ({2}, {3})")]
    TruncationMismatch(usize, usize, usize, usize),

    #[error("perturbation too large: sup|u| = {sup:.6e} exceeds the analyticity guard {limit:.6e}")]
    AmplitudeTooLarge { sup: f64, limit: f64 },

    #[error("eigenvalue vanishes at non-kernel site {0:?}; kernel and truncation disagree")]
    SingularSite(LatticeSite),

    #[error("range contraction failed after {iterations} iterations (last step {last_step:.3e})")]
    ContractionFailed { iterations: usize, last_step: f64 },

    #[error("root finder in a failed at b = {b}: {reason}")]
    RootNotFound { b: f64, reason: String },

    #[error("branch truncated at b = {b_reached} ({cause})")]
    BranchTruncated {
        b_reached: f64,
        branch: Box<Branch>,
        cause: Box<Error>,
    },

    #[error("traveling-wave frequency radicand 1 + (-1)^{l} a^-2 is not positive for a = {a}")]
    DegenerateFrequency { a: f64, l: u8 },

    #[error("Newton iteration failed at b = {b}: {reason}")]
    NewtonFailed { b: f64, reason: String },

    #[error("filaments collide: min|w1| = {min_abs:.6e} below guard {guard:.6e} at t = {t}")]
    CollisionDetected { t: f64, min_abs: f64, guard: f64 },

    #[error("implicit step rejected at t = {t}: {reason}")]
    StepRejected { t: f64, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the command-line front end: 2 usage, 3 domain, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidFrequency { .. }
            | Error::InvalidConfig(_)
            | Error::TruncationMismatch(..)
            | Error::Parse(_) => 2,
            Error::NonPositiveAmplitude { .. }
            | Error::DegenerateFrequency { .. }
            | Error::SingularSite(_) => 3,
            Error::Io(_) => 1,
            _ => 4,
        }
    }
}
