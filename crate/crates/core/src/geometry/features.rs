use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cloud::PointCloud;
use super::kdtree::SpatialIndex;

/// Relative eigenvalue threshold below which a neighborhood counts as
/// rank-deficient (collinear or fully degenerate).
const RANK_TOL: f64 = 1e-9;

/// Per-point unit normals from the k-nearest-neighbor scatter matrix: the
/// eigenvector of the smallest eigenvalue, oriented toward the sensor origin
/// (`dot(normal, -point) >= 0`). Neighborhoods of rank < 2 get `None`.
pub fn estimate_normals<S: Real>(cloud: &PointCloud<S>, k: usize) -> Result<PointCloud<S>> {
    if k < 3 {
        return Err(Error::invalid("normal estimation needs k >= 3"));
    }
    if cloud.len() < k {
        return Err(Error::invalid(format!(
            "normal estimation needs at least k={k} points, got {}",
            cloud.len()
        )));
    }
    let index = SpatialIndex::build(cloud)?;
    let normals = cloud
        .points()
        .iter()
        .map(|p| {
            neighborhood_basis(cloud, &index, p, k).map(|(basis, _)| {
                let mut n = basis.column(2).into_owned();
                if n.dot(&p.coords) > S::zero() {
                    n = -n;
                }
                n
            })
        })
        .collect();
    cloud.clone().with_normals(normals)
}

/// Per-point regularized covariances in the plane-to-plane convention: the
/// scatter eigenvalues are replaced by `(1, 1, epsilon)` so every local
/// surface is modeled as a thin disc. `epsilon = 1` therefore yields the
/// identity. Degenerate neighborhoods get `None`, as with normals.
pub fn estimate_covariances<S: Real>(
    cloud: &PointCloud<S>,
    k: usize,
    epsilon: S,
) -> Result<PointCloud<S>> {
    if k < 4 {
        return Err(Error::invalid("covariance estimation needs k >= 4"));
    }
    if cloud.len() < k {
        return Err(Error::invalid(format!(
            "covariance estimation needs at least k={k} points, got {}",
            cloud.len()
        )));
    }
    let index = SpatialIndex::build(cloud)?;
    let covariances = cloud
        .points()
        .iter()
        .map(|p| {
            neighborhood_basis(cloud, &index, p, k).map(|(basis, _)| {
                let e0: Vector3<S> = basis.column(0).into_owned();
                let e1: Vector3<S> = basis.column(1).into_owned();
                let e2: Vector3<S> = basis.column(2).into_owned();
                e0 * e0.transpose() + e1 * e1.transpose() + e2 * e2.transpose() * epsilon
            })
        })
        .collect();
    cloud.clone().with_covariances(covariances)
}

/// Orthonormal eigenbasis of the k-NN scatter matrix, columns ordered by
/// descending eigenvalue, plus the eigenvalues. `None` when the neighborhood
/// has rank < 2.
fn neighborhood_basis<S: Real>(
    cloud: &PointCloud<S>,
    index: &SpatialIndex<S>,
    p: &nalgebra::Point3<S>,
    k: usize,
) -> Option<(Matrix3<S>, Vector3<S>)> {
    let neighbors = index.knn(p, k);
    let inv_n = S::one() / S::from_usize(neighbors.len()).unwrap();
    let mut mean = Vector3::zeros();
    for n in &neighbors {
        mean += cloud.points()[n.index].coords;
    }
    mean *= inv_n;
    let mut scatter = Matrix3::zeros();
    for n in &neighbors {
        let d = cloud.points()[n.index].coords - mean;
        scatter += d * d.transpose();
    }

    let eig = scatter.symmetric_eigen();
    // order eigenpairs by descending eigenvalue
    let mut ord = [0usize, 1, 2];
    ord.sort_unstable_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("eigenvalues are not NaN")
    });
    let values = Vector3::new(
        eig.eigenvalues[ord[0]],
        eig.eigenvalues[ord[1]],
        eig.eigenvalues[ord[2]],
    );
    if values[1] <= values[0] * S::from_config(RANK_TOL) || values[0] <= S::zero() {
        return None;
    }
    let basis = Matrix3::from_columns(&[
        eig.eigenvectors.column(ord[0]).into_owned(),
        eig.eigenvectors.column(ord[1]).into_owned(),
        eig.eigenvectors.column(ord[2]).into_owned(),
    ]);
    Some((basis, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SplitMix64;
    use approx::assert_relative_eq;
    use nalgebra::Point3;

    fn plane_cloud(n: usize) -> PointCloud<f64> {
        let mut rng = SplitMix64::new(7);
        PointCloud::new(
            (0..n)
                .map(|_| Point3::new(rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.0))
                .collect(),
        )
    }

    #[test]
    fn planar_cloud_gets_vertical_normals() {
        let cloud = plane_cloud(200);
        let out = estimate_normals(&cloud, 8).unwrap();
        for (p, n) in out.points().iter().zip(out.normals().unwrap()) {
            let n = n.expect("plane neighborhoods have rank 2");
            assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-6);
            assert!(n.x.abs() < 1e-6 && n.y.abs() < 1e-6);
            // plane z=0 passes through the sensor origin, both signs valid
            assert!(n.dot(&-p.coords) >= -1e-12);
        }
    }

    #[test]
    fn sphere_normals_are_radial() {
        // Fibonacci sphere: deterministic, locally cap-like neighborhoods.
        // Analytic oracle: the surface normal of a sphere about the origin is
        // the radial direction; orientation toward the origin means -p.
        let n = 600;
        let golden = core::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
        let points: Vec<Point3<f64>> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = golden * i as f64;
                Point3::new(r * phi.cos(), r * phi.sin(), z)
            })
            .collect();
        let cloud = PointCloud::new(points);
        let out = estimate_normals(&cloud, 10).unwrap();
        for (p, n) in out.points().iter().zip(out.normals().unwrap()) {
            let n = n.expect("sphere caps have rank 2");
            let radial_in = -p.coords.normalize();
            let angle = n.dot(&radial_in).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle <= 5.0, "normal {angle:.2} degrees off radial");
        }
    }

    #[test]
    fn collinear_points_are_flagged_invalid() {
        let cloud = PointCloud::from_coords([[0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [2.0, 0.0, 1.0]]);
        let out = estimate_normals(&cloud, 3).unwrap();
        assert!(out.normals().unwrap().iter().all(|n| n.is_none()));
        let out = estimate_covariances(&cloud.clone(), 4, 1e-3);
        assert!(out.is_err()); // k=4 > 3 points

        let cloud4 = PointCloud::from_coords([
            [0.0, 0.0, 1.0],
            [1.0, 0.0, 1.0],
            [2.0, 0.0, 1.0],
            [3.0, 0.0, 1.0],
        ]);
        let out = estimate_covariances(&cloud4, 4, 1e-3).unwrap();
        assert!(out.covariances().unwrap().iter().all(|c| c.is_none()));
    }

    #[test]
    fn planar_covariance_has_thin_axis_normal_to_plane() {
        let cloud = plane_cloud(120);
        let out = estimate_covariances(&cloud, 8, 1e-3).unwrap();
        for c in out.covariances().unwrap() {
            let c = c.unwrap();
            let eig = c.symmetric_eigen();
            let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_relative_eq!(vals[0], 1e-3, epsilon = 1e-9);
            assert_relative_eq!(vals[1], 1.0, epsilon = 1e-9);
            assert_relative_eq!(vals[2], 1.0, epsilon = 1e-9);
            // thin axis is the plane normal (z)
            let thin = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(eig.eigenvectors.column(thin).z.abs() > 1.0 - 1e-6);
        }
    }

    #[test]
    fn unit_epsilon_gives_identity_covariance() {
        let cloud = plane_cloud(50);
        let out = estimate_covariances(&cloud, 6, 1.0).unwrap();
        for c in out.covariances().unwrap() {
            assert_relative_eq!(c.unwrap(), Matrix3::identity(), epsilon = 1e-12);
        }
    }

    #[test]
    fn random_cloud_covariances_are_symmetric_psd() {
        let mut rng = SplitMix64::new(99);
        let cloud = PointCloud::new(
            (0..300)
                .map(|_| {
                    Point3::new(
                        rng.uniform(-5.0, 5.0),
                        rng.uniform(-5.0, 5.0),
                        rng.uniform(-5.0, 5.0),
                    )
                })
                .collect::<Vec<_>>(),
        );
        let out = estimate_covariances(&cloud, 10, 1e-3).unwrap();
        for c in out.covariances().unwrap() {
            let c = c.unwrap();
            assert_relative_eq!(c, c.transpose(), epsilon = 1e-12);
            let eig = c.symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-9));
        }
    }
}
