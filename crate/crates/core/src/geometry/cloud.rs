use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::pose::Pose;

/// An ordered set of 3-D points in meters, with optional per-point surface
/// statistics.
///
/// Normals, when present, are unit length (±1e-6); covariances are symmetric
/// PSD. A `None` entry marks a point whose neighborhood was too degenerate
/// (rank < 2) for the statistic to exist. Both channels always have the same
/// length as `points`.
///
/// Clouds are immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<S: Real = f64> {
    points: Vec<Point3<S>>,
    normals: Option<Vec<Option<Vector3<S>>>>,
    covariances: Option<Vec<Option<Matrix3<S>>>>,
    reflectance: Option<Vec<S>>,
    timestamp: S,
}

impl<S: Real> PointCloud<S> {
    pub fn new(points: Vec<Point3<S>>) -> Self {
        PointCloud {
            points,
            normals: None,
            covariances: None,
            reflectance: None,
            timestamp: S::zero(),
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn from_coords(coords: impl IntoIterator<Item = [S; 3]>) -> Self {
        Self::new(
            coords
                .into_iter()
                .map(|c| Point3::new(c[0], c[1], c[2]))
                .collect(),
        )
    }

    pub fn with_timestamp(mut self, timestamp: S) -> Self {
        self.timestamp = timestamp;
        self
    }

    pub fn with_normals(mut self, normals: Vec<Option<Vector3<S>>>) -> Result<Self> {
        if normals.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "normal channel length {} != point count {}",
                normals.len(),
                self.points.len()
            )));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn with_covariances(mut self, covariances: Vec<Option<Matrix3<S>>>) -> Result<Self> {
        if covariances.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "covariance channel length {} != point count {}",
                covariances.len(),
                self.points.len()
            )));
        }
        self.covariances = Some(covariances);
        Ok(self)
    }

    pub fn with_reflectance(mut self, reflectance: Vec<S>) -> Result<Self> {
        if reflectance.len() != self.points.len() {
            return Err(Error::invalid(format!(
                "reflectance channel length {} != point count {}",
                reflectance.len(),
                self.points.len()
            )));
        }
        self.reflectance = Some(reflectance);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<S>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Option<Vector3<S>>]> {
        self.normals.as_deref()
    }

    pub fn covariances(&self) -> Option<&[Option<Matrix3<S>>]> {
        self.covariances.as_deref()
    }

    pub fn reflectance(&self) -> Option<&[S]> {
        self.reflectance.as_deref()
    }

    pub fn timestamp(&self) -> S {
        self.timestamp
    }

    pub fn normal(&self, i: usize) -> Option<&Vector3<S>> {
        self.normals.as_ref().and_then(|n| n[i].as_ref())
    }

    pub fn covariance(&self, i: usize) -> Option<&Matrix3<S>> {
        self.covariances.as_ref().and_then(|c| c[i].as_ref())
    }

    /// Transforms every point by `pose`; normals are rotated, covariances
    /// conjugated (`R C Rᵀ`), reflectance and timestamp preserved.
    pub fn transformed(&self, pose: &Pose<S>) -> PointCloud<S> {
        let points = self
            .points
            .iter()
            .map(|p| pose.transform_point(p))
            .collect();
        let normals = self.normals.as_ref().map(|ns| {
            ns.iter()
                .map(|n| n.as_ref().map(|n| pose.rotate_vector(n)))
                .collect()
        });
        let covariances = self.covariances.as_ref().map(|cs| {
            cs.iter()
                .map(|c| {
                    c.as_ref()
                        .map(|c| pose.rotation * c * pose.rotation.transpose())
                })
                .collect()
        });
        PointCloud {
            points,
            normals,
            covariances,
            reflectance: self.reflectance.clone(),
            timestamp: self.timestamp,
        }
    }

    /// Concatenation of point and reflectance data; surface statistics are
    /// dropped (they are recomputed on the merged cloud when needed).
    pub fn concat(clouds: &[&PointCloud<S>]) -> PointCloud<S> {
        let mut points = Vec::with_capacity(clouds.iter().map(|c| c.len()).sum());
        for c in clouds {
            points.extend_from_slice(&c.points);
        }
        let timestamp = clouds.last().map(|c| c.timestamp).unwrap_or_else(S::zero);
        PointCloud::new(points).with_timestamp(timestamp)
    }
}

/// Applies a pose to a whole cloud. Thin named wrapper over
/// [`PointCloud::transformed`] for call sites that read better as a free
/// function.
pub fn apply<S: Real>(pose: &Pose<S>, cloud: &PointCloud<S>) -> PointCloud<S> {
    cloud.transformed(pose)
}
