//! Frame-level metric data, connection, curvature, and the auxiliary frame
//! scalars the Killing-equation analysis runs on.

mod curvature;
mod frame;
mod metric;

pub use curvature::{CurvatureSample, InvariantProbe};
pub use frame::{FrameConnection, FrameScalars, TransverseFrame};
pub use metric::CCNVMetric;

use thiserror::Error;

use crate::chart::Point;
use crate::field::EvalError;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("transverse frame must be {want}x{want}, got row of length {got}")]
    BadFrameShape { want: usize, got: usize },
    #[error("transverse frame entry m_{i}{e} below the diagonal is not zero")]
    NotUpperTriangular { i: usize, e: usize },
    #[error("transverse frame diagonal entry m_{i}{i} is identically zero")]
    VanishingDiagonal { i: usize },
    #[error("{what} depends on the light-cone coordinate v")]
    VDependence { what: String },
    #[error("metric is singular at {point:?}")]
    SingularMetric { point: Point },
    #[error("transverse frame is singular at {point:?}")]
    SingularFrame { point: Point },
    #[error("wrong number of W components: expected {want}, got {got}")]
    BadWCount { want: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}
