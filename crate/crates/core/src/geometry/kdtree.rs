use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::scalar::Real;

use super::cloud::PointCloud;

const LEAF_SIZE: usize = 16;

/// One query result: the point's index in the indexed cloud and the
/// Euclidean distance to the query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor<S: Real = f64> {
    pub index: usize,
    pub distance: S,
}

#[derive(Debug, Clone)]
enum Node<S> {
    Leaf {
        start: u32,
        len: u32,
    },
    Split {
        axis: u8,
        value: S,
        left: u32,
        right: u32,
    },
}

/// Static k-d tree over a fixed point set, answering nearest-neighbor, k-NN
/// and radius queries.
///
/// Results match exhaustive linear search; equidistant candidates resolve to
/// the lowest point index. Queries take `&self` only, so an index can be
/// shared across concurrently running estimators.
#[derive(Debug, Clone)]
pub struct SpatialIndex<S: Real = f64> {
    points: Vec<Point3<S>>,
    order: Vec<u32>,
    nodes: Vec<Node<S>>,
    root: u32,
}

impl<S: Real> SpatialIndex<S> {
    /// Builds an index over the cloud's points. Empty input is an error: an
    /// index over nothing cannot answer a nearest query.
    pub fn build(cloud: &PointCloud<S>) -> Result<Self> {
        Self::from_points(cloud.points().to_vec())
    }

    pub fn from_points(points: Vec<Point3<S>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("cannot index an empty point set"));
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = build_node(&points, &mut order, 0, &mut nodes);
        Ok(SpatialIndex {
            points,
            order,
            nodes,
            root,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &Point3<S> {
        &self.points[index]
    }

    pub fn nearest(&self, query: &Point3<S>) -> Neighbor<S> {
        let mut best: Option<(S, u32)> = None;
        self.nearest_rec(self.root, query, &mut best);
        let (d2, idx) = best.expect("index is never empty");
        Neighbor {
            index: idx as usize,
            distance: d2.sqrt(),
        }
    }

    /// The `k` nearest points, sorted by (distance, index). Returns fewer
    /// than `k` entries only when the index holds fewer points.
    pub fn knn(&self, query: &Point3<S>, k: usize) -> Vec<Neighbor<S>> {
        if k == 0 {
            return Vec::new();
        }
        let mut best: Vec<(S, u32)> = Vec::with_capacity(k);
        self.knn_rec(self.root, query, k, &mut best);
        best.into_iter()
            .map(|(d2, idx)| Neighbor {
                index: idx as usize,
                distance: d2.sqrt(),
            })
            .collect()
    }

    /// All points within `radius` (inclusive) of the query, sorted by index.
    pub fn radius(&self, query: &Point3<S>, radius: S) -> Vec<Neighbor<S>> {
        let mut hits: Vec<(S, u32)> = Vec::new();
        self.radius_rec(self.root, query, radius * radius, &mut hits);
        hits.sort_unstable_by_key(|h| h.1);
        hits.into_iter()
            .map(|(d2, idx)| Neighbor {
                index: idx as usize,
                distance: d2.sqrt(),
            })
            .collect()
    }

    fn nearest_rec(&self, node: u32, query: &Point3<S>, best: &mut Option<(S, u32)>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, len } => {
                for &idx in &self.order[*start as usize..(*start + *len) as usize] {
                    let d2 = (self.points[idx as usize] - query).norm_squared();
                    let better = match best {
                        None => true,
                        Some((bd, bi)) => d2 < *bd || (d2 == *bd && idx < *bi),
                    };
                    if better {
                        *best = Some((d2, idx));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis as usize] - *value;
                let (near, far) = if diff < S::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.nearest_rec(near, query, best);
                let plane_d2 = diff * diff;
                if best.is_none_or(|(bd, _)| plane_d2 <= bd) {
                    self.nearest_rec(far, query, best);
                }
            }
        }
    }

    fn knn_rec(&self, node: u32, query: &Point3<S>, k: usize, best: &mut Vec<(S, u32)>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, len } => {
                for &idx in &self.order[*start as usize..(*start + *len) as usize] {
                    let d2 = (self.points[idx as usize] - query).norm_squared();
                    let cand = (d2, idx);
                    if best.len() < k {
                        let pos = best.partition_point(|e| (e.0, e.1) < cand);
                        best.insert(pos, cand);
                    } else if cand < best[k - 1] {
                        best.pop();
                        let pos = best.partition_point(|e| (e.0, e.1) < cand);
                        best.insert(pos, cand);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis as usize] - *value;
                let (near, far) = if diff < S::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.knn_rec(near, query, k, best);
                let plane_d2 = diff * diff;
                if best.len() < k || plane_d2 <= best[best.len() - 1].0 {
                    self.knn_rec(far, query, k, best);
                }
            }
        }
    }

    fn radius_rec(&self, node: u32, query: &Point3<S>, r2: S, hits: &mut Vec<(S, u32)>) {
        match &self.nodes[node as usize] {
            Node::Leaf { start, len } => {
                for &idx in &self.order[*start as usize..(*start + *len) as usize] {
                    let d2 = (self.points[idx as usize] - query).norm_squared();
                    if d2 <= r2 {
                        hits.push((d2, idx));
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[*axis as usize] - *value;
                let (near, far) = if diff < S::zero() {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.radius_rec(near, query, r2, hits);
                if diff * diff <= r2 {
                    self.radius_rec(far, query, r2, hits);
                }
            }
        }
    }
}

fn build_node<S: Real>(
    points: &[Point3<S>],
    order: &mut [u32],
    offset: u32,
    nodes: &mut Vec<Node<S>>,
) -> u32 {
    let n = order.len();
    // axis with the largest spread; a spread of zero means all points
    // coincide and splitting cannot make progress
    let mut spread = [S::zero(); 3];
    for axis in 0..3 {
        let mut lo = points[order[0] as usize][axis];
        let mut hi = lo;
        for &idx in order.iter() {
            let v = points[idx as usize][axis];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        spread[axis] = hi - lo;
    }
    let axis = (0..3).fold(0, |a, b| if spread[b] > spread[a] { b } else { a });

    if n <= LEAF_SIZE || spread[axis] == S::zero() {
        nodes.push(Node::Leaf {
            start: offset,
            len: n as u32,
        });
        return (nodes.len() - 1) as u32;
    }

    let mid = n / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a as usize][axis]
            .partial_cmp(&points[b as usize][axis])
            .expect("point coordinates are not NaN")
    });
    let value = points[order[mid] as usize][axis];
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(points, lo, offset, nodes);
    let right = build_node(points, hi, offset + mid as u32, nodes);
    nodes.push(Node::Split {
        axis: axis as u8,
        value,
        left,
        right,
    });
    (nodes.len() - 1) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::SplitMix64;

    #[test]
    fn nearest_on_a_line() {
        let idx = SpatialIndex::build(&PointCloud::from_coords([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
            .unwrap();
        let n = idx.nearest(&Point3::origin());
        assert_eq!(n.index, 0);
        assert_eq!(n.distance, 1.0);
    }

    #[test]
    fn radius_on_a_line() {
        let idx = SpatialIndex::build(&PointCloud::from_coords([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
            .unwrap();
        let hits = idx.radius(&Point3::origin(), 1.5);
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].index, 0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(SpatialIndex::build(&PointCloud::<f64>::empty()).is_err());
    }

    fn random_cloud(rng: &mut SplitMix64, n: usize) -> Vec<Point3<f64>> {
        (0..n)
            .map(|_| {
                Point3::new(
                    rng.uniform(-50.0, 50.0),
                    rng.uniform(-50.0, 50.0),
                    rng.uniform(-10.0, 10.0),
                )
            })
            .collect()
    }

    /// Exhaustive-search oracle over 1000 random points: every nearest, knn
    /// and radius query must agree with the linear scan exactly.
    #[test]
    fn matches_linear_scan_on_random_clouds() {
        let mut rng = SplitMix64::new(0x5eed);
        let points = random_cloud(&mut rng, 1000);
        let idx = SpatialIndex::from_points(points.clone()).unwrap();

        for _ in 0..200 {
            let q = Point3::new(
                rng.uniform(-60.0, 60.0),
                rng.uniform(-60.0, 60.0),
                rng.uniform(-12.0, 12.0),
            );

            // nearest
            let mut lin: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .map(|(i, p)| ((p - q).norm_squared(), i))
                .collect();
            lin.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = idx.nearest(&q);
            assert_eq!(n.index, lin[0].1);
            assert!((n.distance - lin[0].0.sqrt()).abs() <= 1e-9);

            // knn
            let k = 7;
            let got = idx.knn(&q, k);
            assert_eq!(got.len(), k);
            for (g, e) in got.iter().zip(lin.iter()) {
                assert_eq!(g.index, e.1);
                assert!((g.distance - e.0.sqrt()).abs() <= 1e-9);
            }

            // radius
            let r = rng.uniform(1.0, 20.0);
            let mut expect: Vec<usize> = lin
                .iter()
                .filter(|(d2, _)| d2.sqrt() <= r)
                .map(|&(_, i)| i)
                .collect();
            expect.sort_unstable();
            let got: Vec<usize> = idx.radius(&q, r).iter().map(|h| h.index).collect();
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn handles_duplicate_points() {
        let points = vec![Point3::new(1.0, 1.0, 1.0); 40];
        let idx = SpatialIndex::from_points(points).unwrap();
        let n = idx.nearest(&Point3::origin());
        assert_eq!(n.index, 0); // lowest index wins on ties
        assert_eq!(idx.radius(&Point3::new(1.0, 1.0, 1.0), 0.1).len(), 40);
    }
}
