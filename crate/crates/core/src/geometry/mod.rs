//! Rigid-body transforms, point-cloud containers, voxel downsampling,
//! spatial indexing and local surface statistics.
//!
//! Everything here is immutable after construction and may be shared across
//! concurrently running estimators without synchronization.

mod cloud;
mod features;
mod kdtree;
mod pose;
mod voxel;

pub use cloud::{apply, PointCloud};
pub use features::{estimate_covariances, estimate_normals};
pub use kdtree::{Neighbor, SpatialIndex};
pub use pose::Pose;
pub use voxel::voxel_downsample;

pub(crate) use pose::skew;
pub(crate) use voxel::voxel_key;
