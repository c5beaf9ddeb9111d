//! Construction and verification of higher-dimensional Kundt spacetimes that
//! admit a covariantly constant null vector (CCNV), together with the
//! closed-form families of additional Killing vectors they support.
//!
//! The crate is organized around a small exact-differentiation expression DSL
//! ([`field`]), frame-based metric geometry ([`geometry`]), dual-path Killing
//! vector verification ([`killing`]), constructive family builders and
//! residual verifiers ([`families`]), and closed-form worked examples
//! ([`examples`]). Every identity is checked numerically against independent
//! oracles; nothing relies on a single derivation path.

// Tensor contractions read clearest as explicit index loops.
#![allow(clippy::needless_range_loop)]

pub mod chart;
pub mod examples;
pub mod families;
pub mod field;
pub mod geometry;
pub mod killing;
pub mod report;
pub mod sample;

pub use chart::{Chart, CoordMask, Point};
pub use field::{parse_field, EvalCache, EvalError, ParseError, ScalarField};
pub use geometry::{CCNVMetric, CurvatureSample, FrameScalars, TransverseFrame};
pub use killing::{CoordinateVector, KillingCandidate, KvForm};
pub use report::{CausalLabel, CausalReport, EquationResidual, ResidualReport};
pub use sample::Region;
