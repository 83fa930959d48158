use crate::geometry::Pose;
use crate::registration::EstimatorId;
use crate::scalar::Real;

/// The single shared pose history: one selected frame-to-frame transform per
/// processed frame, the accumulated world poses, and per-frame metadata.
///
/// `world_poses[k] = world_poses[k-1] ∘ relative_transforms[k]`, with the
/// chain starting at the identity; the first committed transform is the
/// identity under the cold-start convention, so `world_poses[0]` is too.
#[derive(Debug, Clone, Default)]
pub struct OdometryHistory<S: Real = f64> {
    relative_transforms: Vec<Pose<S>>,
    world_poses: Vec<Pose<S>>,
    timestamps: Vec<S>,
    selected_methods: Vec<EstimatorId>,
    scores: Vec<Option<S>>,
}

impl<S: Real> OdometryHistory<S> {
    pub fn new() -> Self {
        OdometryHistory {
            relative_transforms: Vec::new(),
            world_poses: Vec::new(),
            timestamps: Vec::new(),
            selected_methods: Vec::new(),
            scores: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.relative_transforms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relative_transforms.is_empty()
    }

    /// Commits one frame atomically.
    pub fn push(
        &mut self,
        timestamp: S,
        transform: Pose<S>,
        method: EstimatorId,
        score: Option<S>,
    ) {
        let world = match self.world_poses.last() {
            Some(w) => w.compose(&transform),
            None => transform,
        };
        self.relative_transforms.push(transform);
        self.world_poses.push(world);
        self.timestamps.push(timestamp);
        self.selected_methods.push(method);
        self.scores.push(score);
    }

    pub fn relative_transforms(&self) -> &[Pose<S>] {
        &self.relative_transforms
    }

    pub fn world_poses(&self) -> &[Pose<S>] {
        &self.world_poses
    }

    pub fn timestamps(&self) -> &[S] {
        &self.timestamps
    }

    pub fn selected_methods(&self) -> &[EstimatorId] {
        &self.selected_methods
    }

    pub fn scores(&self) -> &[Option<S>] {
        &self.scores
    }

    pub fn last_selected(&self) -> Option<&Pose<S>> {
        self.relative_transforms.last()
    }

    pub fn last_timestamp(&self) -> Option<S> {
        self.timestamps.last().copied()
    }

    /// The last committed transform together with the interval it spans.
    /// `None` until two intervals exist: the first committed transform is a
    /// bootstrap identity and measures no motion, so the sanity checks have
    /// nothing to compare against before frame 2.
    pub fn measured_prev(&self) -> Option<(&Pose<S>, S)> {
        let n = self.timestamps.len();
        if n < 2 {
            return None;
        }
        let dt = self.timestamps[n - 1] - self.timestamps[n - 2];
        Some((&self.relative_transforms[n - 1], dt))
    }

    /// Worst elementwise violation of the world/relative chain consistency
    /// invariant, for diagnostics and tests.
    pub fn chain_error(&self) -> S {
        let mut worst = S::zero();
        for k in 1..self.len() {
            let expect = self.world_poses[k - 1].compose(&self.relative_transforms[k]);
            let got = &self.world_poses[k];
            let dr = (expect.rotation - got.rotation).abs().max();
            let dt = (expect.translation - got.translation).abs().max();
            worst = worst.max(dt).max(dr);
        }
        worst
    }
}
