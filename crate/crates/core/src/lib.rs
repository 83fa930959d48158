//! Redundant LiDAR odometry.
//!
//! Several scan-registration estimators (point-to-plane ICP, GICP, NDT and a
//! constant-velocity fallback) run in parallel on every frame and produce
//! transform proposals. Proposals that violate the vehicle's dynamic or
//! kinematic limits are rejected; the survivors are scored by Chamfer
//! distance against a rolling local map and the best one is committed to a
//! single shared odometry history that seeds all estimators on the next
//! frame.
//!
//! The crate also ships KITTI odometry ingestion ([`kitti`]), trajectory
//! export, and the segment-based relative-error metric ([`evaluation`]).
//!
//! All geometry and solver code is generic over the scalar type through the
//! [`Real`] trait; `f64` is the default lane and the one the pipeline and the
//! I/O layers use. Single-precision aliases live at the crate root.

pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod kitti;
pub mod pipeline;
pub mod registration;
pub mod sanity;
mod scalar;
pub mod selection;
pub mod synthetic;

pub use error::{Error, Result};
pub use geometry::{PointCloud, Pose, SpatialIndex};
pub use registration::{EstimatorConfig, EstimatorId, TransformProposal};
pub use sanity::{VehicleModel, Verdict};
pub use scalar::Real;

/// Single-precision lane.
pub type Pose32 = geometry::Pose<f32>;
/// Single-precision lane.
pub type PointCloud32 = geometry::PointCloud<f32>;
/// Single-precision lane.
pub type SpatialIndex32 = geometry::SpatialIndex<f32>;
