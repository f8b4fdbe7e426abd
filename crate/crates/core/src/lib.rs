//! Verification engine for the relativity of causal structure in two-device
//! quantum experiments.
//!
//! Three observers describe the same experiment with different causal
//! assumptions: device A's outcome causes B's ([`CausalFrame::AlphaForward`]),
//! B's causes A's ([`CausalFrame::BetaReverse`]), or neither
//! ([`CausalFrame::GammaSpacelike`]). Each computes the joint outcome
//! distribution through its own pipeline in [`frames`]; [`verify`] checks that
//! they agree, together with the Choi and star-product identities that relate
//! the objects they use.

pub mod cli;
pub mod conditional;
pub mod error;
pub mod frames;
pub mod io;
pub mod linalg;
pub mod objects;
pub mod random;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{BipartiteDims, ComplexMatrix, Subsystem};
pub use objects::{CausalFrame, DensityMatrix, KrausChannel, Povm, Scenario};
