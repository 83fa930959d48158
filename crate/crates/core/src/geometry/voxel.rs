use std::collections::BTreeMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cloud::PointCloud;

/// Voxel-grid downsampling: at most one point per occupied voxel, placed at
/// the centroid of that voxel's points.
///
/// Output order follows the voxel key order (a `BTreeMap` keyed by the voxel
/// grid coordinates), so the result is deterministic for a given input.
/// Surface statistics and reflectance are dropped; the timestamp survives.
pub fn voxel_downsample<S: Real>(cloud: &PointCloud<S>, voxel_size: S) -> Result<PointCloud<S>> {
    if voxel_size <= S::zero() {
        return Err(Error::invalid("voxel_size must be positive"));
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vector3<S>, usize)> = BTreeMap::new();
    for p in cloud.points() {
        let key = voxel_key(p, voxel_size);
        let cell = cells.entry(key).or_insert((Vector3::zeros(), 0));
        cell.0 += p.coords;
        cell.1 += 1;
    }
    let points = cells
        .into_values()
        .map(|(sum, n)| Point3::from(sum / S::from_usize(n).unwrap()))
        .collect();
    Ok(PointCloud::new(points).with_timestamp(cloud.timestamp()))
}

pub(crate) fn voxel_key<S: Real>(p: &Point3<S>, voxel_size: S) -> (i64, i64, i64) {
    let i = |v: S| {
        (v / voxel_size)
            .floor()
            .to_i64()
            .expect("finite coordinate")
    };
    (i(p.x), i(p.y), i(p.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn merges_points_in_one_voxel_to_their_midpoint() {
        let cloud = PointCloud::from_coords([[0.10, 0.10, 0.10], [0.11, 0.10, 0.10]]);
        let out = voxel_downsample(&cloud, 1.0).unwrap();
        assert_eq!(out.len(), 1);
        assert_relative_eq!(
            out.points()[0],
            Point3::new(0.105, 0.10, 0.10),
            epsilon = 1e-12
        );
    }

    #[test]
    fn empty_cloud_stays_empty() {
        let out = voxel_downsample(&PointCloud::<f64>::empty(), 0.5).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn rejects_non_positive_voxel_size() {
        let cloud = PointCloud::from_coords([[0.0; 3]]);
        assert!(voxel_downsample(&cloud, 0.0).is_err());
        assert!(voxel_downsample(&cloud, -1.0).is_err());
    }

    /// Brute-force voxel hashing oracle: group by floor(p / v) with a plain
    /// HashMap and average, then compare as sets.
    fn oracle(cloud: &PointCloud<f64>, v: f64) -> Vec<Point3<f64>> {
        let mut groups: HashMap<(i64, i64, i64), Vec<Point3<f64>>> = HashMap::new();
        for p in cloud.points() {
            let key = (
                (p.x / v).floor() as i64,
                (p.y / v).floor() as i64,
                (p.z / v).floor() as i64,
            );
            groups.entry(key).or_default().push(*p);
        }
        groups
            .into_values()
            .map(|g| {
                let sum = g.iter().fold(Vector3::zeros(), |a, p| a + p.coords);
                Point3::from(sum / g.len() as f64)
            })
            .collect()
    }

    fn sorted_keys(points: &[Point3<f64>]) -> Vec<[i64; 3]> {
        let mut keys: Vec<[i64; 3]> = points
            .iter()
            .map(|p| {
                [
                    (p.x * 1e6).round() as i64,
                    (p.y * 1e6).round() as i64,
                    (p.z * 1e6).round() as i64,
                ]
            })
            .collect();
        keys.sort_unstable();
        keys
    }

    #[test]
    fn uniform_grid_is_preserved_below_pitch() {
        // 10x10x10 points at 1 m pitch, voxel 0.5 m: every point is alone in
        // its voxel, so the count is unchanged. Expected count from the
        // brute-force hashing oracle.
        let mut coords = Vec::new();
        for x in 0..10 {
            for y in 0..10 {
                for z in 0..10 {
                    coords.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let cloud = PointCloud::from_coords(coords);
        let out = voxel_downsample(&cloud, 0.5).unwrap();
        let expect = oracle(&cloud, 0.5);
        assert_eq!(out.len(), 1000);
        assert_eq!(sorted_keys(out.points()), sorted_keys(&expect));
    }

    proptest! {
        #[test]
        fn matches_bruteforce_oracle(
            coords in proptest::collection::vec(proptest::array::uniform3(-20.0f64..20.0), 1..200),
            v in 0.1f64..3.0,
        ) {
            let cloud = PointCloud::from_coords(coords);
            let out = voxel_downsample(&cloud, v).unwrap();
            let expect = oracle(&cloud, v);
            prop_assert_eq!(sorted_keys(out.points()), sorted_keys(&expect));
        }

        #[test]
        fn idempotent(
            coords in proptest::collection::vec(proptest::array::uniform3(-20.0f64..20.0), 1..200),
            v in 0.1f64..3.0,
        ) {
            let once = voxel_downsample(&PointCloud::from_coords(coords), v).unwrap();
            let twice = voxel_downsample(&once, v).unwrap();
            prop_assert_eq!(once.points(), twice.points());
        }
    }
}
