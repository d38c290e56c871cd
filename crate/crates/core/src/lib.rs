//! Exact symbolic engine and numerical verifier for the normalization and
//! singular reduction of the perturbed Kepler (Stark) system after
//! Kustaanheimo-Stiefel regularization.
//!
//! The crate reconstructs the whole pipeline from first principles:
//!
//! * exact sparse polynomial algebra over rational coefficients extended by pi
//!   ([`coeff`], [`poly`], [`grammar`]),
//! * canonical Poisson brackets and ideal membership tests that decide
//!   on-shell identities ([`bracket`], [`ideal`]),
//! * the sixteen quadratic invariants of the oscillator circle action, their
//!   relation suite, and the bracket structure constants ([`gens`]),
//! * closed-form circle-action flows, exact averaging, and the homological
//!   equation solver ([`flows`]),
//! * first and second order normal forms with a term-by-term audit and an
//!   independent direct Lie-series oracle ([`normalform`]),
//! * the second normalization stage and the drop to the reduced phase space
//!   in su(2) x su(2) variables ([`xieta`]),
//! * floating-point evaluation, two numerical integrators, quadrature oracles
//!   and scaling experiments that cross-check every symbolic claim
//!   ([`numeric`]),
//! * machine-readable verification reports and golden-file handling
//!   ([`report`], [`verify`], [`goldens`]).
//!
//! Exactness discipline: every identity is decided by exact arithmetic
//! (reduction to zero in a fixed ideal); floating point appears only in the
//! numerical cross-checks and never feeds back into symbolic results.

pub mod bracket;
pub mod coeff;
pub mod error;
pub mod flows;
pub mod gens;
pub mod goldens;
pub mod grammar;
pub mod ideal;
pub(crate) mod linalg;
pub mod normalform;
pub mod numeric;
pub mod onshell;
pub mod poly;
pub mod report;
pub mod sample;
pub mod space;
pub mod verify;
pub mod xieta;

pub use coeff::{Coeff, Rat};
pub use error::StarkError;
pub use poly::Poly;
pub use space::{Space, SpaceId};

/// Convenience result alias used across the crate.
pub type Result<T> = std::result::Result<T, StarkError>;
