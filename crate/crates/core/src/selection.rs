//! Chamfer-distance scoring against a rolling local map and argmin
//! selection over the sanity-passing proposals.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{voxel_downsample, PointCloud, Pose, SpatialIndex};
use crate::pipeline::OdometryHistory;
use crate::registration::{EstimatorId, TransformProposal};
use crate::sanity::Verdict;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig<S: Real = f64> {
    /// Correspondence search radius, m; source points without a map
    /// neighbor inside it are deleted from the score.
    pub r_s: S,
    /// A score is invalid when fewer than this fraction of the source
    /// points found a correspondence.
    pub min_match_fraction: S,
}

impl<S: Real> Default for ScoringConfig<S> {
    fn default() -> Self {
        ScoringConfig {
            r_s: S::from_config(0.5),
            min_match_fraction: S::from_config(0.1),
        }
    }
}

/// Rolling aggregate of the last `n_map` scans expressed in the
/// previous-frame coordinate system, with a spatial index when nonempty.
#[derive(Debug, Clone)]
pub struct LocalMap<S: Real = f64> {
    pub n_map: usize,
    pub aggregated_cloud: PointCloud<S>,
    pub index: Option<SpatialIndex<S>>,
}

impl<S: Real> LocalMap<S> {
    pub fn empty(n_map: usize) -> Self {
        LocalMap {
            n_map,
            aggregated_cloud: PointCloud::empty(),
            index: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.aggregated_cloud.is_empty()
    }

    /// The same map with its aggregate voxel-downsampled, bounding map size
    /// independently of scan overlap.
    pub fn revoxelized(&self, voxel_size: S) -> Result<LocalMap<S>> {
        if self.is_empty() {
            return Ok(LocalMap::empty(self.n_map));
        }
        let cloud = voxel_downsample(&self.aggregated_cloud, voxel_size)?;
        let index = SpatialIndex::build(&cloud)?;
        Ok(LocalMap {
            n_map: self.n_map,
            aggregated_cloud: cloud,
            index: Some(index),
        })
    }
}

/// Aggregates the last `min(n_map, scans.len())` scans into the coordinate
/// system of the most recent one, using the selected odometry chain.
///
/// `scans` are the committed (voxelized) scans in chronological order, the
/// last entry being the scan of the previous frame; `history` must hold one
/// world pose per entry of `scans` (trailing alignment).
pub fn build_local_map<S: Real>(
    history: &OdometryHistory<S>,
    scans: &[&PointCloud<S>],
    n_map: usize,
) -> LocalMap<S> {
    let m = n_map.min(scans.len()).min(history.len());
    if m == 0 {
        return LocalMap::empty(n_map);
    }
    let world = history.world_poses();
    let newest_world = &world[world.len() - 1];
    let newest_inv = newest_world.inverse();

    let mut parts: Vec<PointCloud<S>> = Vec::with_capacity(m);
    for j in 0..m {
        let scan = scans[scans.len() - m + j];
        let pose_j = &world[world.len() - m + j];
        let to_prev = newest_inv.compose(pose_j);
        parts.push(scan.transformed(&to_prev));
    }
    let refs: Vec<&PointCloud<S>> = parts.iter().collect();
    let aggregated = PointCloud::concat(&refs);
    let index = SpatialIndex::build(&aggregated).ok();
    LocalMap {
        n_map,
        aggregated_cloud: aggregated,
        index,
    }
}

/// Mean nearest-neighbor distance of the transformed source against the
/// map, after deleting points with no correspondence within `r_s`.
///
/// `None` marks an invalid score: empty map, or the surviving fraction fell
/// below `min_match_fraction`.
pub fn chamfer_distance<S: Real>(
    source: &PointCloud<S>,
    map: &LocalMap<S>,
    transform: &Pose<S>,
    cfg: &ScoringConfig<S>,
) -> Option<S> {
    let index = map.index.as_ref()?;
    if source.is_empty() {
        return None;
    }
    let mut matched = 0usize;
    let mut total = S::zero();
    for p in source.points() {
        let q = transform.transform_point(p);
        let nn = index.nearest(&q);
        if nn.distance <= cfg.r_s {
            matched += 1;
            total += nn.distance;
        }
    }
    let fraction = S::from_usize(matched).unwrap() / S::from_usize(source.len()).unwrap();
    if fraction < cfg.min_match_fraction {
        return None;
    }
    Some(total / S::from_usize(matched).unwrap())
}

/// Outcome of scoring one frame's proposals.
#[derive(Debug, Clone)]
pub struct Selection<S: Real = f64> {
    /// Index of the winning proposal in `proposals`.
    pub selected: usize,
    /// All proposals, with `chamfer` filled in for the scored ones.
    pub proposals: Vec<TransformProposal<S>>,
}

impl<S: Real> Selection<S> {
    pub fn winner(&self) -> &TransformProposal<S> {
        &self.proposals[self.selected]
    }
}

/// Scores every sanity-passing proposal against the map and returns the one
/// with the lowest valid Chamfer score. Exact ties resolve by estimator
/// priority ([`EstimatorId`] order). When no proposal has a valid score the
/// constant-velocity proposal wins; the caller must always include it.
pub fn select_best<S: Real>(
    mut proposals: Vec<TransformProposal<S>>,
    source: &PointCloud<S>,
    map: &LocalMap<S>,
    cfg: &ScoringConfig<S>,
) -> Selection<S> {
    let scores: Vec<Option<S>> = proposals
        .par_iter()
        .map(|p| {
            if p.sanity == Verdict::Passed {
                chamfer_distance(source, map, &p.transform, cfg)
            } else {
                None
            }
        })
        .collect();
    for (p, s) in proposals.iter_mut().zip(&scores) {
        p.chamfer = *s;
    }

    let best = proposals
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.chamfer.map(|c| (i, c, p.method)))
        .min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .expect("chamfer scores are not NaN")
                .then(a.2.cmp(&b.2))
        });

    let selected = match best {
        Some((i, _, _)) => i,
        None => proposals
            .iter()
            .position(|p| p.method == EstimatorId::Cvm)
            .expect("proposal set must include the constant-velocity fallback"),
    };
    Selection {
        selected,
        proposals,
    }
}
