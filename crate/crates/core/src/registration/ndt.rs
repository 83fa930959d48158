//! Normal distributions transform: the target cloud is summarized as one
//! Gaussian per occupied grid cell and the source pose is optimized so the
//! transformed points are likely under their cells' densities (Gauss-Newton
//! on the whitened residuals, i.e. summed per-cell log-likelihood).

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Matrix6, Point3, Vector3, Vector6};

use crate::geometry::{skew, voxel_key, PointCloud, Pose};
use crate::scalar::Real;

use super::{
    backtrack_step, solve_normal_equations, split_tangent, Estimator, EstimatorConfig, EstimatorId,
    FrameContext, ObjectivePair, SolveDiagnostics, TargetModel, TransformProposal,
};

/// Cells with fewer points than this carry no usable density.
const MIN_POINTS_PER_CELL: usize = 5;

/// Covariance eigenvalues are floored at this fraction of the largest one,
/// so planar cells stay invertible.
const EIGENVALUE_FLOOR: f64 = 1e-3;

const DAMPING: f64 = 1e-6;

/// Gaussian summary of one cell. `whitener` is `L⁻¹` of the covariance's
/// Cholesky factor, so `‖whitener·(p − mean)‖²` is the Mahalanobis distance.
#[derive(Debug, Clone, PartialEq)]
pub struct NdtCell<S: Real = f64> {
    pub mean: Vector3<S>,
    pub whitener: Matrix3<S>,
}

/// Per-cell Gaussians over a target cloud; lookups are single-cell (no
/// neighbor blending).
#[derive(Debug, Clone)]
pub struct NdtGrid<S: Real = f64> {
    cell_size: S,
    cells: BTreeMap<(i64, i64, i64), NdtCell<S>>,
}

impl<S: Real> NdtGrid<S> {
    pub fn build(cloud: &PointCloud<S>, cell_size: S) -> Self {
        let mut buckets: BTreeMap<(i64, i64, i64), Vec<Vector3<S>>> = BTreeMap::new();
        for p in cloud.points() {
            buckets
                .entry(voxel_key(p, cell_size))
                .or_default()
                .push(p.coords);
        }
        let mut cells = BTreeMap::new();
        for (key, points) in buckets {
            if points.len() < MIN_POINTS_PER_CELL {
                continue;
            }
            let inv_n = S::one() / S::from_usize(points.len()).unwrap();
            let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p) * inv_n;
            let mut cov = Matrix3::zeros();
            for p in &points {
                let d = p - mean;
                cov += d * d.transpose();
            }
            cov *= inv_n;

            let mut eig = cov.symmetric_eigen();
            let max_val = eig.eigenvalues.iter().fold(S::zero(), |a, &v| a.max(v));
            if max_val <= S::zero() {
                continue; // all points coincide, no density to model
            }
            let floor = max_val * S::from_config(EIGENVALUE_FLOOR);
            for v in eig.eigenvalues.iter_mut() {
                *v = v.max(floor);
            }
            let cov = eig.recompose();
            let Some(chol) = nalgebra::Cholesky::new(cov) else {
                continue;
            };
            let Some(whitener) = chol.l().try_inverse() else {
                continue;
            };
            cells.insert(key, NdtCell { mean, whitener });
        }
        NdtGrid { cell_size, cells }
    }

    pub fn cell_at(&self, p: &Point3<S>) -> Option<&NdtCell<S>> {
        self.cells.get(&voxel_key(p, self.cell_size))
    }

    pub fn cell_size(&self) -> S {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

pub struct Ndt;

impl<S: Real> Estimator<S> for Ndt {
    fn id(&self) -> EstimatorId {
        EstimatorId::Ndt
    }

    fn estimate(
        &self,
        ctx: &FrameContext<'_, S>,
        cfg: &EstimatorConfig<S>,
    ) -> TransformProposal<S> {
        match ctx.target {
            Some(target) => ndt_estimate(ctx.source, target, &ctx.initial_guess, cfg),
            None => TransformProposal::failed(EstimatorId::Ndt, &ctx.initial_guess),
        }
    }
}

pub fn ndt_estimate<S: Real>(
    source: &PointCloud<S>,
    target: &TargetModel<S>,
    initial_guess: &Pose<S>,
    cfg: &EstimatorConfig<S>,
) -> TransformProposal<S> {
    solve(source, target, initial_guess, cfg).0
}

pub fn solve<S: Real>(
    source: &PointCloud<S>,
    target: &TargetModel<S>,
    initial_guess: &Pose<S>,
    cfg: &EstimatorConfig<S>,
) -> (TransformProposal<S>, SolveDiagnostics<S>) {
    let mut diag = SolveDiagnostics::new();
    let mut proposal = TransformProposal::failed(EstimatorId::Ndt, initial_guess);
    let grid = match &target.ndt {
        Some(grid) if !grid.is_empty() && !source.is_empty() => grid,
        _ => return (proposal, diag),
    };

    let mut pose = *initial_guess;
    for it in 0..cfg.max_iterations {
        proposal.iterations = it + 1;

        // freeze the point-to-cell assignment for this iteration
        let mut rows: Vec<(Vector3<S>, &NdtCell<S>)> = Vec::new();
        for s in source.points() {
            let p = pose.transform_point(s);
            if let Some(cell) = grid.cell_at(&p) {
                rows.push((s.coords, cell));
            }
        }
        if rows.is_empty() {
            proposal.converged = false;
            break;
        }

        let before = objective(&pose, &rows);

        let mut h = Matrix6::<S>::zeros();
        let mut g = Vector6::<S>::zeros();
        for (s, cell) in &rows {
            let p = pose.rotation * s + pose.translation;
            let r = cell.whitener * (p - cell.mean);
            let mut j = nalgebra::Matrix3x6::<S>::zeros();
            j.fixed_view_mut::<3, 3>(0, 0)
                .copy_from(&(-(cell.whitener * skew(&p))));
            j.fixed_view_mut::<3, 3>(0, 3).copy_from(&cell.whitener);
            h += j.transpose() * j;
            g += j.transpose() * r;
        }
        let step = match solve_normal_equations(&h, &(-g)) {
            Some(step) => step,
            None => {
                let damped = h + Matrix6::identity() * S::from_config(DAMPING);
                match solve_normal_equations(&damped, &(-g)) {
                    Some(step) => step,
                    None => {
                        proposal.converged = false;
                        break;
                    }
                }
            }
        };
        let (w, t) = split_tangent(&step);
        let Some((new_pose, after, alpha)) =
            backtrack_step(&pose, &w, &t, before, |p| objective(p, &rows))
        else {
            proposal.converged = false;
            break;
        };
        pose = new_pose;

        diag.objective_trace.push(ObjectivePair {
            before,
            after,
            correspondences: rows.len(),
        });
        diag.pose_trace.push(pose);
        proposal.residual = (after / S::from_usize(rows.len()).unwrap()).sqrt();

        if (t * alpha).norm() < cfg.convergence_translation
            && (w * alpha).norm() < cfg.convergence_rotation
        {
            proposal.converged = true;
            break;
        }
    }
    proposal.transform = pose;
    (proposal, diag)
}

/// Summed Mahalanobis-squared distance of the transformed points to their
/// frozen cells.
fn objective<S: Real>(pose: &Pose<S>, rows: &[(Vector3<S>, &NdtCell<S>)]) -> S {
    rows.iter().fold(S::zero(), |acc, (s, cell)| {
        let p = pose.rotation * s + pose.translation;
        let r = cell.whitener * (p - cell.mean);
        acc + r.norm_squared()
    })
}
