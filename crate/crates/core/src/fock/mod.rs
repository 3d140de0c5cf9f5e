//! Truncated multimode Fock spaces: modes, basis ranking, sparse pure
//! states, density operators and general operators.

mod density;
mod mode;
mod operator;
mod space;
mod state;

pub use density::{DensityOperator, TraceFlag, POSITIVITY_TOL};
pub use mode::{Beam, ModeLabel, Polarization};
pub use operator::FockOperator;
pub use space::{FockSpace, Occupation};
pub use state::{NormFlag, StateVector};

/// Amplitudes and matrix entries with magnitude below this are not stored.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
