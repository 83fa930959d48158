//! The pluggable estimator interface and the built-in frame-to-frame
//! transform estimators: point-to-plane ICP, GICP, NDT and the
//! constant-velocity model.
//!
//! Every estimator is a pure function of its inputs: same source, target,
//! initial guess and config produce a bitwise-identical proposal. Failure
//! never aborts a frame; estimators report a non-converged proposal and the
//! sanity checks and scoring decide its fate.

mod cvm;
mod gicp;
mod ndt;
mod p2p_icp;

pub use cvm::cvm_estimate;
pub use gicp::{gicp_estimate, solve as gicp_solve};
pub use ndt::{ndt_estimate, solve as ndt_solve, NdtCell, NdtGrid};
pub use p2p_icp::{p2p_icp_estimate, solve as p2p_icp_solve};

use nalgebra::{Matrix6, Point3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::{estimate_covariances, estimate_normals, PointCloud, Pose, SpatialIndex};
use crate::sanity::Verdict;
use crate::scalar::Real;

/// Identifies an odometry method within a pipeline configuration.
///
/// `Huang` and `ColorIcp` are reserved for camera-based plug-ins and have no
/// built-in implementation. Variant order is the tie-breaking priority when
/// two proposals score exactly equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorId {
    P2pIcp,
    Gicp,
    Ndt,
    Huang,
    ColorIcp,
    Cvm,
}

impl EstimatorId {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorId::P2pIcp => "p2p_icp",
            EstimatorId::Gicp => "gicp",
            EstimatorId::Ndt => "ndt",
            EstimatorId::Huang => "huang",
            EstimatorId::ColorIcp => "color_icp",
            EstimatorId::Cvm => "cvm",
        }
    }

    pub const ALL: [EstimatorId; 6] = [
        EstimatorId::P2pIcp,
        EstimatorId::Gicp,
        EstimatorId::Ndt,
        EstimatorId::Huang,
        EstimatorId::ColorIcp,
        EstimatorId::Cvm,
    ];
}

impl std::fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorId {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        EstimatorId::ALL
            .iter()
            .copied()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| format!("unknown estimator `{s}`"))
    }
}

/// Solver constants shared by the scan-matching estimators. All values are
/// overridable through the pipeline configuration file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig<S: Real = f64> {
    pub max_iterations: usize,
    /// Translation step below which an estimator counts as converged, m.
    pub convergence_translation: S,
    /// Rotation step below which an estimator counts as converged, rad.
    pub convergence_rotation: S,
    /// Correspondences farther apart than this are dropped, m.
    pub max_correspondence_distance: S,
    /// NDT grid cell edge length, m.
    pub ndt_cell_size: S,
    /// Small eigenvalue in the GICP plane-to-plane covariance model.
    pub gicp_epsilon: S,
    /// Neighborhood size for normal and covariance estimation.
    pub neighborhood_k: usize,
}

impl<S: Real> Default for EstimatorConfig<S> {
    fn default() -> Self {
        EstimatorConfig {
            max_iterations: 30,
            convergence_translation: S::from_config(1e-4),
            convergence_rotation: S::from_config(1e-4),
            max_correspondence_distance: S::one(),
            ndt_cell_size: S::one(),
            gicp_epsilon: S::from_config(1e-3),
            neighborhood_k: 10,
        }
    }
}

/// One estimator's candidate frame-to-frame transform. `transform` maps the
/// source (current) frame into the target (previous) frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformProposal<S: Real = f64> {
    pub method: EstimatorId,
    pub transform: Pose<S>,
    pub converged: bool,
    pub iterations: usize,
    /// Final objective value. Units are method-specific: RMS point-to-plane
    /// distance (m) for P2P-ICP, RMS Mahalanobis distance for GICP and NDT,
    /// zero for CVM, infinity for runs that never evaluated an objective.
    pub residual: S,
    pub sanity: Verdict,
    /// Chamfer score in meters; present only after the proposal passed the
    /// sanity checks and scored against a non-degenerate map.
    pub chamfer: Option<S>,
}

impl<S: Real> TransformProposal<S> {
    /// Proposal for an estimator run that could not produce an estimate; the
    /// transform falls back to the initial guess.
    pub fn failed(method: EstimatorId, guess: &Pose<S>) -> Self {
        TransformProposal {
            method,
            transform: *guess,
            converged: false,
            iterations: 0,
            residual: S::from_config(f64::INFINITY),
            sanity: Verdict::Untested,
            chamfer: None,
        }
    }
}

/// Preprocessed view of the target (previous) scan, computed once per frame
/// and shared read-only by all estimators: surface statistics on the cloud,
/// a spatial index and the NDT grid.
#[derive(Debug, Clone)]
pub struct TargetModel<S: Real = f64> {
    pub cloud: PointCloud<S>,
    pub index: SpatialIndex<S>,
    pub ndt: Option<NdtGrid<S>>,
}

/// Which preprocessing the enabled estimator set needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Features {
    pub normals: bool,
    pub covariances: bool,
    pub ndt_grid: bool,
}

impl Features {
    pub fn all() -> Self {
        Features {
            normals: true,
            covariances: true,
            ndt_grid: true,
        }
    }

    pub fn for_estimators(ids: impl IntoIterator<Item = EstimatorId>) -> Self {
        let mut f = Features {
            normals: false,
            covariances: false,
            ndt_grid: false,
        };
        for id in ids {
            match id {
                EstimatorId::P2pIcp => f.normals = true,
                EstimatorId::Gicp => f.covariances = true,
                EstimatorId::Ndt => f.ndt_grid = true,
                _ => {}
            }
        }
        f
    }
}

/// Attaches the requested surface statistics to a cloud, skipping channels
/// it already carries. A cloud too small for the neighborhood size keeps
/// the channel off; estimators that need it then report failed proposals
/// instead of aborting the frame.
pub fn estimate_features_for<S: Real>(
    cloud: PointCloud<S>,
    cfg: &EstimatorConfig<S>,
    features: Features,
) -> PointCloud<S> {
    let mut cloud = cloud;
    if features.normals && cloud.normals().is_none() {
        if let Ok(with) = estimate_normals(&cloud, cfg.neighborhood_k) {
            cloud = with;
        }
    }
    if features.covariances && cloud.covariances().is_none() {
        if let Ok(with) = estimate_covariances(&cloud, cfg.neighborhood_k, cfg.gicp_epsilon) {
            cloud = with;
        }
    }
    cloud
}

impl<S: Real> TargetModel<S> {
    /// Attaches the requested channels and builds the indices over a
    /// nonempty cloud. Channels already present are reused as-is.
    pub fn build(
        cloud: PointCloud<S>,
        cfg: &EstimatorConfig<S>,
        features: Features,
    ) -> Result<Self> {
        let cloud = estimate_features_for(cloud, cfg, features);
        let index = SpatialIndex::build(&cloud)?;
        let ndt = features
            .ndt_grid
            .then(|| NdtGrid::build(&cloud, cfg.ndt_cell_size));
        Ok(TargetModel { cloud, index, ndt })
    }
}

/// Per-frame inputs handed to every estimator. `target` is `None` on the
/// first frame, when no previous scan exists yet.
#[derive(Debug, Clone, Copy)]
pub struct FrameContext<'a, S: Real = f64> {
    /// Index of the frame being processed.
    pub frame: usize,
    pub source: &'a PointCloud<S>,
    pub target: Option<&'a TargetModel<S>>,
    /// The previously selected transform; seeds every scan matcher.
    pub initial_guess: Pose<S>,
    /// Last committed frame-to-frame transform, if any. Identical to
    /// `initial_guess` under the shared-history protocol but kept separate
    /// so the constant-velocity model is defined by history alone.
    pub last_selected: Option<Pose<S>>,
}

/// A frame-to-frame odometry estimator. Implementations must be pure: no
/// mutable shared state, no unseeded randomness.
pub trait Estimator<S: Real>: Send + Sync {
    fn id(&self) -> EstimatorId;
    fn estimate(&self, ctx: &FrameContext<'_, S>, cfg: &EstimatorConfig<S>)
        -> TransformProposal<S>;
}

/// Built-in estimator for an id; `None` for the reserved plug-in slots.
pub fn builtin_estimator<S: Real>(id: EstimatorId) -> Option<Box<dyn Estimator<S>>> {
    match id {
        EstimatorId::P2pIcp => Some(Box::new(p2p_icp::P2pIcp)),
        EstimatorId::Gicp => Some(Box::new(gicp::Gicp)),
        EstimatorId::Ndt => Some(Box::new(ndt::Ndt)),
        EstimatorId::Cvm => Some(Box::new(cvm::Cvm)),
        EstimatorId::Huang | EstimatorId::ColorIcp => None,
    }
}

/// Objective values around one Gauss-Newton step, both evaluated on the
/// correspondence set (and weights) frozen at the start of the iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectivePair<S: Real = f64> {
    pub before: S,
    pub after: S,
    pub correspondences: usize,
}

/// Per-run solver internals, useful to tests and diagnostics; the pipeline
/// only keeps the proposal.
#[derive(Debug, Clone)]
pub struct SolveDiagnostics<S: Real = f64> {
    /// Pose after each completed iteration.
    pub pose_trace: Vec<Pose<S>>,
    pub objective_trace: Vec<ObjectivePair<S>>,
}

impl<S: Real> SolveDiagnostics<S> {
    fn new() -> Self {
        SolveDiagnostics {
            pose_trace: Vec::new(),
            objective_trace: Vec::new(),
        }
    }
}

/// Solves the SPD normal-equation system `h x = g`; `None` if `h` is
/// singular.
pub(crate) fn solve_normal_equations<S: Real>(
    h: &Matrix6<S>,
    g: &Vector6<S>,
) -> Option<Vector6<S>> {
    nalgebra::Cholesky::new(*h).map(|chol| chol.solve(g))
}

/// Splits a solved 6-vector into (rotation vector, translation).
pub(crate) fn split_tangent<S: Real>(x: &Vector6<S>) -> (Vector3<S>, Vector3<S>) {
    (
        Vector3::new(x[0], x[1], x[2]),
        Vector3::new(x[3], x[4], x[5]),
    )
}

/// Applies a Gauss-Newton step with backtracking: the step is halved until
/// the frozen-correspondence objective stops increasing, which keeps every
/// iteration non-increasing and prevents overshoot on badly conditioned
/// frames. Returns the accepted pose, its objective and the applied scale;
/// `None` when even the smallest trial step increases the objective.
pub(crate) fn backtrack_step<S: Real>(
    pose: &Pose<S>,
    rotvec: &Vector3<S>,
    translation: &Vector3<S>,
    before: S,
    objective: impl Fn(&Pose<S>) -> S,
) -> Option<(Pose<S>, S, S)> {
    let slack = S::one() + S::from_config(1e-12);
    let mut alpha = S::one();
    for _ in 0..8 {
        let cand =
            Pose::from_rotvec_translation(&(rotvec * alpha), &(translation * alpha)).compose(pose);
        let after = objective(&cand);
        if after <= before * slack {
            return Some((cand, after, alpha));
        }
        alpha *= S::from_config(0.5);
    }
    None
}

pub(crate) fn transformed_coords<S: Real>(pose: &Pose<S>, p: &Point3<S>) -> Vector3<S> {
    pose.rotation * p.coords + pose.translation
}
