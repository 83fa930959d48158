//! Point-to-plane ICP: minimizes the summed squared distance between each
//! source point and the tangent plane at its nearest target point.

use nalgebra::{Matrix6, Vector3, Vector6};

use crate::geometry::{PointCloud, Pose};
use crate::scalar::Real;

use super::{
    backtrack_step, solve_normal_equations, split_tangent, transformed_coords, Estimator,
    EstimatorConfig, EstimatorId, FrameContext, ObjectivePair, SolveDiagnostics, TargetModel,
    TransformProposal,
};

pub struct P2pIcp;

impl<S: Real> Estimator<S> for P2pIcp {
    fn id(&self) -> EstimatorId {
        EstimatorId::P2pIcp
    }

    fn estimate(
        &self,
        ctx: &FrameContext<'_, S>,
        cfg: &EstimatorConfig<S>,
    ) -> TransformProposal<S> {
        match ctx.target {
            Some(target) => p2p_icp_estimate(ctx.source, target, &ctx.initial_guess, cfg),
            None => TransformProposal::failed(EstimatorId::P2pIcp, &ctx.initial_guess),
        }
    }
}

pub fn p2p_icp_estimate<S: Real>(
    source: &PointCloud<S>,
    target: &TargetModel<S>,
    initial_guess: &Pose<S>,
    cfg: &EstimatorConfig<S>,
) -> TransformProposal<S> {
    solve(source, target, initial_guess, cfg).0
}

/// One correspondence frozen for an iteration: source point, target point,
/// target normal.
type Row<S> = (Vector3<S>, Vector3<S>, Vector3<S>);

/// Full solver entry; returns the proposal plus per-iteration diagnostics.
pub fn solve<S: Real>(
    source: &PointCloud<S>,
    target: &TargetModel<S>,
    initial_guess: &Pose<S>,
    cfg: &EstimatorConfig<S>,
) -> (TransformProposal<S>, SolveDiagnostics<S>) {
    let mut diag = SolveDiagnostics::new();
    let mut proposal = TransformProposal::failed(EstimatorId::P2pIcp, initial_guess);
    if source.is_empty() || target.cloud.normals().is_none() {
        return (proposal, diag);
    }

    let mut pose = *initial_guess;
    for it in 0..cfg.max_iterations {
        proposal.iterations = it + 1;

        let mut rows: Vec<Row<S>> = Vec::new();
        for s in source.points() {
            let p = pose.transform_point(s);
            let nn = target.index.nearest(&p);
            if nn.distance > cfg.max_correspondence_distance {
                continue;
            }
            let Some(normal) = target.cloud.normal(nn.index) else {
                continue;
            };
            rows.push((s.coords, target.cloud.points()[nn.index].coords, *normal));
        }
        if rows.len() < 6 {
            proposal.converged = false;
            break;
        }

        let before = objective(&pose, &rows);

        let mut h = Matrix6::<S>::zeros();
        let mut g = Vector6::<S>::zeros();
        for (s, q, n) in &rows {
            let p = pose.rotation * s + pose.translation;
            let r = (p - q).dot(n);
            let jr = p.cross(n);
            let j = Vector6::new(jr.x, jr.y, jr.z, n.x, n.y, n.z);
            h += j * j.transpose();
            g += j * r;
        }
        let Some(step) = solve_normal_equations(&h, &(-g)) else {
            proposal.converged = false;
            break;
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

/// Sum of squared point-to-plane distances over a frozen correspondence set.
fn objective<S: Real>(pose: &Pose<S>, rows: &[Row<S>]) -> S {
    rows.iter().fold(S::zero(), |acc, (s, q, n)| {
        let p = transformed_coords(pose, &nalgebra::Point3::from(*s));
        let r = (p - q).dot(n);
        acc + r * r
    })
}
