//! Constant-velocity model: repeats the previously selected transform under
//! a zero-acceleration assumption. Ignores the sensor data entirely, always
//! converges, and passes the sanity checks by construction, so the pipeline
//! always has a fallback proposal.

use crate::geometry::Pose;
use crate::sanity::Verdict;
use crate::scalar::Real;

use super::{Estimator, EstimatorConfig, EstimatorId, FrameContext, TransformProposal};

pub struct Cvm;

impl<S: Real> Estimator<S> for Cvm {
    fn id(&self) -> EstimatorId {
        EstimatorId::Cvm
    }

    fn estimate(
        &self,
        ctx: &FrameContext<'_, S>,
        _cfg: &EstimatorConfig<S>,
    ) -> TransformProposal<S> {
        cvm_estimate(ctx.last_selected.as_ref())
    }
}

/// The previously selected frame-to-frame transform, or identity on the
/// first frame.
pub fn cvm_estimate<S: Real>(last_selected: Option<&Pose<S>>) -> TransformProposal<S> {
    TransformProposal {
        method: EstimatorId::Cvm,
        transform: last_selected.copied().unwrap_or_else(Pose::identity),
        converged: true,
        iterations: 0,
        residual: S::zero(),
        sanity: Verdict::Untested,
        chamfer: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use crate::synthetic::random_transform;

    #[test]
    fn empty_history_yields_identity() {
        let prop = cvm_estimate::<f64>(None);
        assert!(prop.converged);
        assert_eq!(prop.transform, Pose::identity());
    }

    #[test]
    fn repeats_the_last_selected_transform_exactly() {
        let t = random_transform::<f64>(1, 1.0, 5.0);
        let prop = cvm_estimate(Some(&t));
        assert_eq!(prop.transform.rotation, t.rotation);
        assert_eq!(prop.transform.translation, t.translation);
    }

    #[test]
    fn output_is_independent_of_the_clouds() {
        // the estimator-trait path ignores source and target entirely
        let t = random_transform::<f64>(2, 1.0, 5.0);
        let a = PointCloud::from_coords([[0.0; 3]]);
        let b = PointCloud::from_coords([[100.0, -3.0, 7.0], [1.0, 2.0, 3.0]]);
        let cfg = EstimatorConfig::default();
        let mk = |cloud: &PointCloud<f64>| {
            let ctx = FrameContext {
                frame: 7,
                source: cloud,
                target: None,
                initial_guess: Pose::identity(),
                last_selected: Some(t),
            };
            Cvm.estimate(&ctx, &cfg)
        };
        assert_eq!(mk(&a).transform, mk(&b).transform);
        assert_eq!(mk(&a).transform.translation, t.translation);
    }
}
