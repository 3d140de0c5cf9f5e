//! Truncated-Fock-space simulation of the two-source photonic teleportation
//! apparatus, with post-selected (coincidence) conditioning.

#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod extrapolate;
pub mod fock;
pub mod optics;
pub mod oracle;
pub mod sources;
pub mod validate;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;

// Compiles and runs every snippet in the guide under `cargo test --doc`.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fock-space.md")]
    mod fock_space {}
    #[doc = include_str!("../../../book/src/optics.md")]
    mod optics {}
    #[doc = include_str!("../../../book/src/sources.md")]
    mod sources {}
    #[doc = include_str!("../../../book/src/detection.md")]
    mod detection {}
    #[doc = include_str!("../../../book/src/apparatus.md")]
    mod apparatus {}
    #[doc = include_str!("../../../book/src/tomography.md")]
    mod tomography {}
    #[doc = include_str!("../../../book/src/validation.md")]
    mod validation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
