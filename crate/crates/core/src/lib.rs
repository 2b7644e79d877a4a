//! Construction and verification of the calibrated webs `W(n,E)` built from
//! a `k0`-balanced set of generating webs.
//!
//! The crate is generic over the scalar model ([`Scalar`]): exact rationals
//! for rational integrals, multi-precision floats when `exp`/`log` occur.

pub mod abelrank;
pub mod catalog;
pub mod combin;
pub mod error;
pub mod expr;
pub mod jets;
pub mod linalg;
pub mod ordinary;
pub mod report;
pub mod sampler;
pub mod scalar;
pub mod web;

pub use error::{Error, Result};
pub use expr::{Expr, TruncatedPoly};
pub use report::{Check, Verdict, VerificationReport, Witness};
pub use sampler::GenericPointSampler;
pub use scalar::{Mp128, Mp256, Mp512, MpFloat, Precision, Rational, Scalar, ScalarMode};
pub use web::{assemble, AssembledWeb, BalancedSet, Label, TkWeb};

/// Exact jet matrix.
pub type ExactJetMatrix = jets::JetMatrix<Rational>;
/// Jet matrix at the default float precision.
pub type FloatJetMatrix = jets::JetMatrix<Mp128>;
