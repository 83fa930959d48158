use nalgebra::{Matrix3, Point3, Vector3};

use crate::scalar::Real;

/// How far `RᵀR` may drift from the identity before [`Pose::compose`]
/// re-orthonormalizes the rotation.
const ORTHONORMALITY_TOL: f64 = 1e-9;

/// A rigid transform in SE(3): orthonormal rotation (det +1) plus a
/// translation in meters.
///
/// `rotation` is kept orthonormal to within `1e-9` of `RᵀR = I`; composition
/// repairs accumulated floating-point drift by polar projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<S: Real = f64> {
    pub rotation: Matrix3<S>,
    pub translation: Vector3<S>,
}

impl<S: Real> Default for Pose<S> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<S: Real> Pose<S> {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<S>, translation: Vector3<S>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(x: S, y: S, z: S) -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::new(x, y, z),
        }
    }

    /// Rotation about the +Z axis by `angle` radians, zero translation.
    pub fn from_rotation_z(angle: S) -> Self {
        let (s, c) = (angle.sin(), angle.cos());
        let rotation = Matrix3::new(
            c,
            -s,
            S::zero(),
            s,
            c,
            S::zero(),
            S::zero(),
            S::zero(),
            S::one(),
        );
        Pose {
            rotation,
            translation: Vector3::zeros(),
        }
    }

    /// Rodrigues' formula for a rotation vector (axis times angle).
    pub fn rotation_from_rotvec(w: &Vector3<S>) -> Matrix3<S> {
        let theta = w.norm();
        let k = skew(w);
        if theta < S::from_config(1e-12) {
            // second-order series is exact to machine precision here
            return Matrix3::identity() + k + k * k * S::from_config(0.5);
        }
        let a = theta.sin() / theta;
        let b = (S::one() - theta.cos()) / (theta * theta);
        Matrix3::identity() + k * a + k * k * b
    }

    /// Pose from a rotation vector and translation, e.g. a solved SE(3)
    /// tangent increment.
    pub fn from_rotvec_translation(w: &Vector3<S>, t: &Vector3<S>) -> Self {
        Pose {
            rotation: Self::rotation_from_rotvec(w),
            translation: *t,
        }
    }

    /// Applies `b` then `a`. The rotation is re-orthonormalized when
    /// accumulated drift exceeds `1e-9` so long chains stay valid.
    pub fn compose(&self, other: &Pose<S>) -> Pose<S> {
        let rotation = self.rotation * other.rotation;
        let translation = self.rotation * other.translation + self.translation;
        let mut out = Pose {
            rotation,
            translation,
        };
        if out.orthonormality_error() > S::from_config(ORTHONORMALITY_TOL) {
            out.rotation = orthonormalize(&out.rotation);
        }
        out
    }

    pub fn inverse(&self) -> Pose<S> {
        let rotation = self.rotation.transpose();
        Pose {
            rotation,
            translation: -(rotation * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Point3<S>) -> Point3<S> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn rotate_vector(&self, v: &Vector3<S>) -> Vector3<S> {
        self.rotation * v
    }

    /// Max-abs entry of `RᵀR − I`.
    pub fn orthonormality_error(&self) -> S {
        let d = self.rotation.transpose() * self.rotation - Matrix3::identity();
        d.iter().fold(S::zero(), |m, &v| m.max(v.abs()))
    }

    /// Rotation angle in radians, `acos((trace − 1) / 2)` clamped to survive
    /// floating-point drift.
    pub fn rotation_angle(&self) -> S {
        let t = (self.rotation.trace() - S::one()) * S::from_config(0.5);
        t.clamp(-S::one(), S::one()).acos()
    }

    /// Yaw about +Z (ZYX convention). The kinematic checks treat the vehicle
    /// as planar, so roll and pitch are ignored by callers.
    pub fn yaw(&self) -> S {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    /// Translation distance and rotation angle between two poses; used for
    /// convergence checks and recovery assertions.
    pub fn delta(&self, other: &Pose<S>) -> (S, S) {
        let rel = self.inverse().compose(other);
        (rel.translation.norm(), rel.rotation_angle())
    }

    /// The same pose with the rotation projected onto the nearest
    /// orthonormal matrix with det +1.
    pub fn renormalized(&self) -> Pose<S> {
        Pose {
            rotation: orthonormalize(&self.rotation),
            translation: self.translation,
        }
    }
}

pub(crate) fn skew<S: Real>(v: &Vector3<S>) -> Matrix3<S> {
    Matrix3::new(
        S::zero(),
        -v.z,
        v.y,
        v.z,
        S::zero(),
        -v.x,
        -v.y,
        v.x,
        S::zero(),
    )
}

/// Nearest orthonormal matrix with det +1 (polar projection via SVD).
fn orthonormalize<S: Real>(m: &Matrix3<S>) -> Matrix3<S> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("3x3 SVD");
    let v_t = svd.v_t.expect("3x3 SVD");
    let mut r = u * v_t;
    if r.determinant() < S::zero() {
        let mut flip = Matrix3::identity();
        flip[(2, 2)] = -S::one();
        r = u * flip * v_t;
    }
    r
}
