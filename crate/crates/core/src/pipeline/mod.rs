//! Per-frame orchestration: preprocess the scan, fan out to the estimators,
//! sanity-check and score the proposals, select, and commit to the shared
//! history.
//!
//! Frames are strictly sequential; estimators within one frame may run
//! concurrently. The history commit is atomic per frame and no estimator
//! ever observes a partially committed history, so concurrent and
//! sequential execution produce bitwise-identical results.

pub mod config;
pub mod history;
pub mod trace;

pub use config::PipelineConfig;
pub use history::OdometryHistory;
pub use trace::{read_trace_file, write_trace_csv, write_trace_file, TraceRecord, TRACE_HEADER};

use std::collections::VecDeque;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{voxel_downsample, PointCloud, Pose};
use crate::registration::{
    builtin_estimator, cvm_estimate, estimate_features_for, Estimator, EstimatorId, Features,
    FrameContext, TargetModel, TransformProposal,
};
use crate::sanity::{
    acceleration_estimate, check_acceleration, check_kinematics, transform_speed, Verdict,
};
use crate::scalar::Real;
use crate::selection::{build_local_map, select_best};

/// Motion quantities of one proposal, used for the trace diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalMotion<S: Real = f64> {
    pub speed: S,
    pub accel: Option<S>,
    pub yaw_rate: S,
    pub lat_vel: S,
}

/// Everything the pipeline decided about one frame.
#[derive(Debug, Clone)]
pub struct FrameResult<S: Real = f64> {
    pub frame: usize,
    pub timestamp: S,
    pub delta_tau: S,
    /// Index of the selected proposal.
    pub selected: usize,
    pub proposals: Vec<TransformProposal<S>>,
    /// Aligned with `proposals`.
    pub motion: Vec<ProposalMotion<S>>,
    /// Set when the frame had to fall back to the constant-velocity model
    /// because the scan was empty.
    pub degraded: bool,
    /// World pose after committing this frame.
    pub world_pose: Pose<S>,
}

impl<S: Real> FrameResult<S> {
    pub fn selected_proposal(&self) -> &TransformProposal<S> {
        &self.proposals[self.selected]
    }

    /// Trace rows for this frame, one per proposal.
    pub fn trace_records(&self) -> Vec<TraceRecord> {
        let f64of = |v: S| v.to_f64().expect("finite scalar");
        self.proposals
            .iter()
            .zip(&self.motion)
            .enumerate()
            .map(|(i, (p, m))| TraceRecord {
                frame_index: self.frame,
                timestamp: f64of(self.timestamp),
                method: p.method,
                converged: p.converged,
                sanity: p.sanity,
                chamfer: p.chamfer.map(f64of),
                selected: i == self.selected,
                speed: f64of(m.speed),
                accel: m.accel.map(f64of),
                yaw_rate: f64of(m.yaw_rate),
                lat_vel: f64of(m.lat_vel),
                wx: f64of(self.world_pose.translation.x),
                wy: f64of(self.world_pose.translation.y),
                wz: f64of(self.world_pose.translation.z),
            })
            .collect()
    }
}

/// Stateful per-sequence odometry pipeline.
pub struct Pipeline<S: Real = f64> {
    cfg: PipelineConfig<S>,
    estimators: Vec<Box<dyn Estimator<S>>>,
    features: Features,
    history: OdometryHistory<S>,
    /// Last `n_map` committed voxelized scans, oldest first.
    recent_scans: VecDeque<PointCloud<S>>,
    /// Preprocessed previous scan; `None` before the first frame and after
    /// a degraded one.
    target: Option<TargetModel<S>>,
    frame: usize,
}

impl<S: Real> Pipeline<S> {
    /// Pipeline with the built-in estimators named by the configuration.
    pub fn new(cfg: PipelineConfig<S>) -> Result<Self> {
        cfg.validate()?;
        let estimators: Vec<Box<dyn Estimator<S>>> = cfg
            .estimator_ids()
            .into_iter()
            .map(|id| builtin_estimator(id).expect("validated as built-in"))
            .collect();
        Self::from_parts(cfg, estimators)
    }

    /// Pipeline with a caller-supplied estimator stack (the plug-in path).
    /// `cfg.enabled_estimators` is ignored; the stack must contain an
    /// estimator with the constant-velocity id so the fallback stays total.
    pub fn with_estimators(
        cfg: PipelineConfig<S>,
        estimators: Vec<Box<dyn Estimator<S>>>,
    ) -> Result<Self> {
        cfg.validate_values()?;
        if !estimators.iter().any(|e| e.id() == EstimatorId::Cvm) {
            return Err(Error::Config(
                "estimator stack must include the constant-velocity fallback".into(),
            ));
        }
        Self::from_parts(cfg, estimators)
    }

    fn from_parts(cfg: PipelineConfig<S>, estimators: Vec<Box<dyn Estimator<S>>>) -> Result<Self> {
        let features = Features::for_estimators(estimators.iter().map(|e| e.id()));
        Ok(Pipeline {
            cfg,
            estimators,
            features,
            history: OdometryHistory::new(),
            recent_scans: VecDeque::new(),
            target: None,
            frame: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig<S> {
        &self.cfg
    }

    pub fn history(&self) -> &OdometryHistory<S> {
        &self.history
    }

    pub fn into_history(self) -> OdometryHistory<S> {
        self.history
    }

    pub fn frames_processed(&self) -> usize {
        self.frame
    }

    fn delta_tau(&self, timestamp: S) -> S {
        match self.history.last_timestamp() {
            Some(prev) if timestamp - prev > S::zero() => timestamp - prev,
            _ => S::one() / self.cfg.default_frame_rate,
        }
    }

    fn motion_of(&self, transform: &Pose<S>, delta_tau: S) -> ProposalMotion<S> {
        ProposalMotion {
            speed: transform_speed(transform, delta_tau),
            accel: self
                .history
                .measured_prev()
                .map(|(prev, prev_dt)| acceleration_estimate(prev, prev_dt, transform, delta_tau)),
            yaw_rate: transform.yaw() / delta_tau,
            lat_vel: transform.translation.y / delta_tau,
        }
    }

    fn sanity_verdict(&self, transform: &Pose<S>, delta_tau: S) -> Verdict {
        let prev = self.history.measured_prev();
        match check_acceleration(prev, transform, delta_tau, &self.cfg.vehicle) {
            Verdict::Passed => check_kinematics(transform, prev, delta_tau, &self.cfg.vehicle),
            rejected => rejected,
        }
    }

    /// Processes one scan: voxelize, estimate, sanity-check, score, select,
    /// commit. An empty scan degrades to the constant-velocity proposal.
    pub fn process_frame(&mut self, scan: PointCloud<S>, timestamp: S) -> Result<FrameResult<S>> {
        let delta_tau = self.delta_tau(timestamp);
        if scan.is_empty() {
            return Ok(self.degraded_frame(scan, timestamp, delta_tau));
        }

        let voxelized = voxel_downsample(&scan, self.cfg.voxel_size)?;
        // source-side covariances feed GICP now and are reused when this
        // scan becomes the target model of the next frame
        let source = if self.features.covariances {
            estimate_features_for(
                voxelized.clone(),
                &self.cfg.estimator,
                Features {
                    normals: false,
                    covariances: true,
                    ndt_grid: false,
                },
            )
        } else {
            voxelized.clone()
        };

        let last_selected = self.history.last_selected().copied();
        let ctx = FrameContext {
            frame: self.frame,
            source: &source,
            target: self.target.as_ref(),
            initial_guess: last_selected.unwrap_or_else(Pose::identity),
            last_selected,
        };
        let cfg_est = &self.cfg.estimator;
        let mut proposals: Vec<TransformProposal<S>> = if self.cfg.parallel {
            self.estimators
                .par_iter()
                .map(|e| e.estimate(&ctx, cfg_est))
                .collect()
        } else {
            self.estimators
                .iter()
                .map(|e| e.estimate(&ctx, cfg_est))
                .collect()
        };

        for p in &mut proposals {
            p.sanity = self.sanity_verdict(&p.transform, delta_tau);
        }
        let motion: Vec<ProposalMotion<S>> = proposals
            .iter()
            .map(|p| self.motion_of(&p.transform, delta_tau))
            .collect();

        let scan_refs: Vec<&PointCloud<S>> = self.recent_scans.iter().collect();
        let map = build_local_map(&self.history, &scan_refs, self.cfg.n_map)
            .revoxelized(self.cfg.voxel_size)?;
        let selection = select_best(proposals, &source, &map, &self.cfg.scoring);
        let winner = *selection.winner();

        self.commit(voxelized, timestamp, &winner);
        // preprocess this scan as the next frame's target; failure (e.g. a
        // scan too small for feature estimation) degrades the estimators
        // next frame instead of aborting this one
        self.target = TargetModel::build(source, &self.cfg.estimator, self.features).ok();

        let result = FrameResult {
            frame: self.frame - 1,
            timestamp,
            delta_tau,
            selected: selection.selected,
            proposals: selection.proposals,
            motion,
            degraded: false,
            world_pose: *self.history.world_poses().last().expect("just committed"),
        };
        Ok(result)
    }

    fn degraded_frame(
        &mut self,
        empty_scan: PointCloud<S>,
        timestamp: S,
        delta_tau: S,
    ) -> FrameResult<S> {
        let mut proposal = cvm_estimate(self.history.last_selected());
        // nothing to evaluate against; the fallback is accepted by policy
        proposal.sanity = Verdict::Passed;
        let motion = self.motion_of(&proposal.transform, delta_tau);
        self.commit(empty_scan, timestamp, &proposal);
        self.target = None;
        FrameResult {
            frame: self.frame - 1,
            timestamp,
            delta_tau,
            selected: 0,
            proposals: vec![proposal],
            motion: vec![motion],
            degraded: true,
            world_pose: *self.history.world_poses().last().expect("just committed"),
        }
    }

    fn commit(&mut self, scan: PointCloud<S>, timestamp: S, winner: &TransformProposal<S>) {
        self.history
            .push(timestamp, winner.transform, winner.method, winner.chamfer);
        self.recent_scans.push_back(scan);
        while self.recent_scans.len() > self.cfg.n_map {
            self.recent_scans.pop_front();
        }
        self.frame += 1;
    }

    /// Folds [`Pipeline::process_frame`] over a scan stream, collecting the
    /// trace. Errors carry the index of the offending frame.
    pub fn drive<I>(&mut self, scans: I) -> Result<Vec<TraceRecord>>
    where
        I: IntoIterator<Item = Result<(PointCloud<S>, S)>>,
    {
        let mut trace = Vec::new();
        for item in scans {
            let frame = self.frame;
            let (scan, timestamp) = item.map_err(|e| e.at_frame(frame))?;
            let result = self
                .process_frame(scan, timestamp)
                .map_err(|e| e.at_frame(frame))?;
            trace.extend(result.trace_records());
        }
        Ok(trace)
    }
}

/// Result of a whole-sequence run.
#[derive(Debug, Clone)]
pub struct SequenceRun<S: Real = f64> {
    pub history: OdometryHistory<S>,
    pub trace: Vec<TraceRecord>,
}

/// Runs a full scan stream through a fresh pipeline.
pub fn run_sequence<S, I>(scans: I, cfg: &PipelineConfig<S>) -> Result<SequenceRun<S>>
where
    S: Real,
    I: IntoIterator<Item = Result<(PointCloud<S>, S)>>,
{
    let mut pipeline = Pipeline::new(cfg.clone())?;
    let trace = pipeline.drive(scans)?;
    if pipeline.frames_processed() == 0 {
        return Err(Error::invalid("scan stream was empty"));
    }
    Ok(SequenceRun {
        history: pipeline.into_history(),
        trace,
    })
}
