//! Generalized ICP: plane-to-plane registration weighting every
//! correspondence by the combined local covariances of both clouds,
//! `(C_target + R C_source Rᵀ)⁻¹`, solved by Gauss-Newton on the SE(3)
//! tangent space.

use nalgebra::{Matrix3, Matrix6, Point3, Vector3, Vector6};

use crate::geometry::{skew, PointCloud, Pose};
use crate::scalar::Real;

use super::{
    backtrack_step, solve_normal_equations, split_tangent, Estimator, EstimatorConfig, EstimatorId,
    FrameContext, ObjectivePair, SolveDiagnostics, TargetModel, TransformProposal,
};

/// Damping added to the normal equations when the plain system is singular.
const DAMPING: f64 = 1e-6;

pub struct Gicp;

impl<S: Real> Estimator<S> for Gicp {
    fn id(&self) -> EstimatorId {
        EstimatorId::Gicp
    }

    fn estimate(
        &self,
        ctx: &FrameContext<'_, S>,
        cfg: &EstimatorConfig<S>,
    ) -> TransformProposal<S> {
        match ctx.target {
            Some(target) => gicp_estimate(ctx.source, target, &ctx.initial_guess, cfg),
            None => TransformProposal::failed(EstimatorId::Gicp, &ctx.initial_guess),
        }
    }
}

/// Requires regularized covariances on both clouds; the pipeline attaches
/// them to the source before fanning out.
pub fn gicp_estimate<S: Real>(
    source: &PointCloud<S>,
    target: &TargetModel<S>,
    initial_guess: &Pose<S>,
    cfg: &EstimatorConfig<S>,
) -> TransformProposal<S> {
    solve(source, target, initial_guess, cfg).0
}

/// Correspondence with its weight frozen for one iteration: source point,
/// target point, combined-information matrix.
type Row<S> = (Vector3<S>, Vector3<S>, Matrix3<S>);

pub fn solve<S: Real>(
    source: &PointCloud<S>,
    target: &TargetModel<S>,
    initial_guess: &Pose<S>,
    cfg: &EstimatorConfig<S>,
) -> (TransformProposal<S>, SolveDiagnostics<S>) {
    let mut diag = SolveDiagnostics::new();
    let mut proposal = TransformProposal::failed(EstimatorId::Gicp, initial_guess);
    if source.is_empty() || source.covariances().is_none() || target.cloud.covariances().is_none() {
        return (proposal, diag);
    }

    let mut pose = *initial_guess;
    for it in 0..cfg.max_iterations {
        proposal.iterations = it + 1;

        let mut rows: Vec<Row<S>> = Vec::new();
        for (si, s) in source.points().iter().enumerate() {
            let Some(c_source) = source.covariance(si) else {
                continue;
            };
            let p = pose.transform_point(s);
            let nn = target.index.nearest(&p);
            if nn.distance > cfg.max_correspondence_distance {
                continue;
            }
            let Some(c_target) = target.cloud.covariance(nn.index) else {
                continue;
            };
            let combined = c_target + pose.rotation * c_source * pose.rotation.transpose();
            let Some(weight) = combined.try_inverse() else {
                continue;
            };
            rows.push((s.coords, target.cloud.points()[nn.index].coords, weight));
        }
        if rows.len() < 6 {
            proposal.converged = false;
            break;
        }

        let before = objective(&pose, &rows);

        let mut h = Matrix6::<S>::zeros();
        let mut g = Vector6::<S>::zeros();
        for (s, q, w) in &rows {
            let p = pose.rotation * s + pose.translation;
            let d = p - q;
            // J = [-[p]x | I], stacked as a 3x6 block
            let mut j = nalgebra::Matrix3x6::<S>::zeros();
            j.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(&p)));
            j.fixed_view_mut::<3, 3>(0, 3)
                .copy_from(&Matrix3::identity());
            let jtw = j.transpose() * w;
            h += jtw * j;
            g += jtw * d;
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

/// Sum of Mahalanobis-squared distances over a frozen correspondence and
/// weight set.
fn objective<S: Real>(pose: &Pose<S>, rows: &[Row<S>]) -> S {
    rows.iter().fold(S::zero(), |acc, (s, q, w)| {
        let p = pose.transform_point(&Point3::from(*s)).coords;
        let d = p - q;
        acc + (w * d).dot(&d)
    })
}
