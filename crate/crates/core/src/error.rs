use thiserror::Error;

use crate::fock::ModeLabel;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("occupation sums to {total} photons, above the cutoff {cutoff}")]
    CutoffExceeded { total: usize, cutoff: usize },
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("mode {0} appears twice")]
    DuplicateMode(ModeLabel),
    #[error("mode {0} is present in both operands")]
    OverlappingModes(ModeLabel),
    #[error("mode {0} is not part of the space")]
    ModeNotInSpace(ModeLabel),
    #[error("mode {0} is not a mode of the operator being reduced")]
    NotSubset(ModeLabel),
    #[error("operands live on different Fock spaces")]
    SpaceMismatch,
    #[error("input must be normalized, found norm/trace {0}")]
    Unnormalized(f64),
    #[error("operator is not Hermitian (max |M - M^dag| = {0:e})")]
    NonHermitian(f64),
    #[error("Hermitian symmetrization corrected {0:e}, above the 1e-10 drift bound")]
    HermiticityDrift(f64),
    #[error("{name} = {value} is invalid: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },
    #[error("malformed mode set: {0}")]
    MalformedModes(String),
    #[error("loss mode {0} is already used by another element")]
    LossModeCollision(ModeLabel),
    #[error("truncation discards weight {weight:e}, above the limit {limit:e}; raise the cutoff or lower the coupling")]
    TruncationWeight { weight: f64, limit: f64 },
    #[error("outcome pattern {pattern} has structurally zero probability ({probability:e})")]
    ZeroProbability { pattern: String, probability: f64 },
    #[error("unknown detector `{0}`")]
    UnknownDetector(String),
    #[error("outcome {outcome} is not valid for detector `{detector}`")]
    InvalidOutcome { detector: String, outcome: String },
    #[error("detectors `{0}` and `{1}` watch overlapping modes")]
    DetectorOverlap(String, String),
    #[error("extrapolation residuals are not monotone in the coupling: {0:?}")]
    NonMonotoneResiduals(Vec<f64>),
    #[error("{0}")]
    InvalidInput(String),
    #[error("scenario {0} cannot be evaluated as a single conditional state")]
    IncompatibleScenario(String),
    #[error("tomographic inversion is singular (rank {rank} of {needed}); settings are not informationally complete")]
    SingularInversion { rank: usize, needed: usize },
}
