//! Visual shape servoing of composite rigid/deformable objects held by two
//! planar grippers.
//!
//! The pipeline mirrors a desk-scale manipulation cell: a quasi-static plant
//! renders the object contour into a virtual camera ([`plant`]), contour
//! moments are compressed into a 10-dimensional feature vector ([`moments`]),
//! a deformation Jacobian is estimated online ([`estimation`]), and a
//! sliding-mode or resolved-rate controller drives the features to a target
//! ([`control`]). [`harness`] wires the loop together and records runs.

pub mod control;
pub mod estimation;
pub mod geometry;
pub mod harness;
pub mod moments;
pub mod plant;
pub mod signals;

use nalgebra::{SMatrix, SVector};

/// Feature-space dimension: 7 log-compressed contour invariants + centroid + angle.
pub const FEATURE_DIM: usize = 10;
/// Actuation dimension: two planar grippers, (x, y, theta) each.
pub const POSE_DIM: usize = 6;

pub type FeatureVec = SVector<f64, FEATURE_DIM>;
pub type PoseVec = SVector<f64, POSE_DIM>;
/// Deformation Jacobian mapping gripper twist to feature velocity.
pub type Jacobian = SMatrix<f64, FEATURE_DIM, POSE_DIM>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate contour: {0}")]
    DegenerateContour(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("estimator diverged: non-finite entries in {0}")]
    EstimatorDiverged(&'static str),
    #[error("non-monotonic timestamps: {now} does not advance past {prev}")]
    NonMonotonicTime { prev: f64, now: f64 },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {msg}")]
    FileFormat { path: String, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
