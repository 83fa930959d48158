//! KITTI relative-error odometry metric: translational error (%) and
//! rotational error (deg per 100 m) averaged over trajectory segments of
//! 100 m to 800 m, with start frames stepped every 10 frames.

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::scalar::Real;

/// Segment lengths of the benchmark, meters.
pub const SEGMENT_LENGTHS: [f64; 8] = [100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0];

/// Start frames are stepped by this many frames.
pub const FRAME_STEP: usize = 10;

/// Relative pose error of one trajectory segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentError<S: Real = f64> {
    pub first_frame: usize,
    /// Nominal segment length, m.
    pub length: S,
    /// Relative translation error, dimensionless.
    pub t_err: S,
    /// Rotation error, rad/m.
    pub r_err: S,
}

#[derive(Debug, Clone)]
pub struct EvalSummary<S: Real = f64> {
    /// Mean relative translation error in percent; `None` when the
    /// trajectory is shorter than the smallest segment.
    pub t_avg_percent: Option<S>,
    /// Mean rotation error in degrees per 100 m; `None` as above.
    pub r_avg_deg_per_100m: Option<S>,
    pub segments: Vec<SegmentError<S>>,
}

/// Cumulative arc length along a trajectory, one entry per pose.
pub fn trajectory_distances<S: Real>(poses: &[Pose<S>]) -> Vec<S> {
    let mut dist = Vec::with_capacity(poses.len());
    let mut acc = S::zero();
    dist.push(acc);
    for w in poses.windows(2) {
        acc += (w[1].translation - w[0].translation).norm();
        dist.push(acc);
    }
    dist
}

/// First frame at or beyond `target` arc length, starting at `first`.
fn frame_reaching<S: Real>(dist: &[S], first: usize, target: S) -> Option<usize> {
    (first..dist.len()).find(|&i| dist[i] >= target)
}

/// Evaluates an estimated trajectory against ground truth. Both must have
/// the same length (≥ 2); segment boundaries come from the ground-truth arc
/// length.
pub fn evaluate<S: Real>(
    estimated: &[Pose<S>],
    ground_truth: &[Pose<S>],
) -> Result<EvalSummary<S>> {
    if estimated.len() != ground_truth.len() {
        return Err(Error::invalid(format!(
            "trajectory length mismatch: {} estimated vs {} ground-truth poses",
            estimated.len(),
            ground_truth.len()
        )));
    }
    if estimated.len() < 2 {
        return Err(Error::invalid("trajectories need at least 2 poses"));
    }

    let dist = trajectory_distances(ground_truth);
    let mut segments = Vec::new();
    for first in (0..ground_truth.len()).step_by(FRAME_STEP) {
        for &length in &SEGMENT_LENGTHS {
            let length = S::from_config(length);
            let Some(last) = frame_reaching(&dist, first, dist[first] + length) else {
                break; // longer segments cannot fit either
            };
            segments.push(segment_error(estimated, ground_truth, first, last, length));
        }
    }

    let (t_avg_percent, r_avg_deg_per_100m) = if segments.is_empty() {
        (None, None)
    } else {
        let n = S::from_usize(segments.len()).unwrap();
        let t_sum = segments.iter().fold(S::zero(), |a, s| a + s.t_err);
        let r_sum = segments.iter().fold(S::zero(), |a, s| a + s.r_err);
        (
            Some(t_sum / n * S::from_config(100.0)),
            Some(r_sum / n * S::from_config(180.0 / std::f64::consts::PI) * S::from_config(100.0)),
        )
    };
    Ok(EvalSummary {
        t_avg_percent,
        r_avg_deg_per_100m,
        segments,
    })
}

fn segment_error<S: Real>(
    estimated: &[Pose<S>],
    ground_truth: &[Pose<S>],
    first: usize,
    last: usize,
    length: S,
) -> SegmentError<S> {
    let gt_rel = ground_truth[first].inverse().compose(&ground_truth[last]);
    let est_rel = estimated[first].inverse().compose(&estimated[last]);
    let error = gt_rel.inverse().compose(&est_rel);
    SegmentError {
        first_frame: first,
        length,
        t_err: error.translation.norm() / length,
        r_err: error.rotation_angle() / length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight_line(n: usize, step: f64) -> Vec<Pose<f64>> {
        (0..n)
            .map(|k| Pose::from_translation(step * k as f64, 0.0, 0.0))
            .collect()
    }

    #[test]
    fn identical_trajectories_score_zero() {
        let gt = straight_line(1001, 1.0);
        let summary = evaluate(&gt, &gt).unwrap();
        assert!(!summary.segments.is_empty());
        assert_eq!(summary.t_avg_percent, Some(0.0));
        assert_eq!(summary.r_avg_deg_per_100m, Some(0.0));
    }

    #[test]
    fn one_percent_scale_inflation_reads_one_percent() {
        // straight 1000 m ground truth at 1 m/frame; the estimate inflates
        // every step by 1 %, so every segment errs by exactly 1 % of its
        // length
        let gt = straight_line(1001, 1.0);
        let est = straight_line(1001, 1.01);
        let summary = evaluate(&est, &gt).unwrap();
        let t = summary.t_avg_percent.unwrap();
        assert!((t - 1.0).abs() <= 0.01, "t_avg = {t}");
    }

    #[test]
    fn yaw_drift_reads_one_degree_per_100m() {
        // exact translation, 0.01° of yaw drift per meter
        let gt = straight_line(1001, 1.0);
        let drift_per_frame = 0.01_f64.to_radians();
        let est: Vec<Pose<f64>> = (0..1001)
            .map(|k| {
                let mut p = Pose::from_rotation_z(drift_per_frame * k as f64);
                p.translation = nalgebra::Vector3::new(k as f64, 0.0, 0.0);
                p
            })
            .collect();
        let summary = evaluate(&est, &gt).unwrap();
        let r = summary.r_avg_deg_per_100m.unwrap();
        assert!((r - 1.0).abs() <= 0.01, "r_avg = {r}");
    }

    #[test]
    fn short_trajectory_reports_undefined() {
        let gt = straight_line(50, 1.0); // 49 m < 100 m
        let summary = evaluate(&gt, &gt).unwrap();
        assert!(summary.segments.is_empty());
        assert_eq!(summary.t_avg_percent, None);
        assert_eq!(summary.r_avg_deg_per_100m, None);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let gt = straight_line(20, 1.0);
        let est = straight_line(19, 1.0);
        assert!(evaluate(&est, &gt).is_err());
        assert!(evaluate(&est[..1], &gt[..1]).is_err());
    }

    #[test]
    fn invariant_to_a_global_rigid_transform() {
        // irregular spacing keeps segment boundaries away from knife edges,
        // where the rounding introduced by the global transform could flip
        // an end frame
        let mut rng = crate::synthetic::SplitMix64::new(41);
        let mut x = 0.0;
        let gt: Vec<Pose<f64>> = (0..701)
            .map(|_| {
                x += rng.uniform(0.8, 1.3);
                Pose::from_translation(x, 0.0, 0.0)
            })
            .collect();
        let est: Vec<Pose<f64>> = gt
            .iter()
            .map(|p| Pose::from_translation(p.translation.x * 1.004, 0.0, 0.0))
            .collect();
        let base = evaluate(&est, &gt).unwrap();

        let mut g = Pose::from_rotation_z(1.1);
        g.translation = nalgebra::Vector3::new(-40.0, 13.0, 2.0);
        let gt_moved: Vec<Pose<f64>> = gt.iter().map(|p| g.compose(p)).collect();
        let est_moved: Vec<Pose<f64>> = est.iter().map(|p| g.compose(p)).collect();
        let moved = evaluate(&est_moved, &gt_moved).unwrap();

        assert_eq!(base.segments.len(), moved.segments.len());
        let a = base.t_avg_percent.unwrap();
        let b = moved.t_avg_percent.unwrap();
        assert!((a - b).abs() <= 1e-9);
        let a = base.r_avg_deg_per_100m.unwrap();
        let b = moved.r_avg_deg_per_100m.unwrap();
        assert!((a - b).abs() <= 1e-9);
    }

    /// Independent brute-force segment enumeration: for every admissible
    /// start frame, scan forward through the cumulative distances.
    fn enumerate_segments_bruteforce(gt: &[Pose<f64>]) -> Vec<(usize, usize, f64)> {
        let dist = trajectory_distances(gt);
        let mut out = Vec::new();
        let mut first = 0;
        while first < gt.len() {
            for length in SEGMENT_LENGTHS {
                let mut found = None;
                for j in first..gt.len() {
                    if dist[j] >= dist[first] + length {
                        found = Some(j);
                        break;
                    }
                }
                match found {
                    Some(j) => out.push((first, j, length)),
                    None => break,
                }
            }
            first += FRAME_STEP;
        }
        out
    }

    #[test]
    fn segment_enumeration_matches_bruteforce() {
        // irregular spacing so segment ends do not align trivially
        let mut rng = crate::synthetic::SplitMix64::new(13);
        let mut x = 0.0;
        let poses: Vec<Pose<f64>> = (0..900)
            .map(|_| {
                x += rng.uniform(0.2, 2.3);
                Pose::from_translation(x, 0.0, 0.0)
            })
            .collect();
        let summary = evaluate(&poses, &poses).unwrap();
        let expect = enumerate_segments_bruteforce(&poses);
        assert_eq!(summary.segments.len(), expect.len());
        for (seg, (first, _, length)) in summary.segments.iter().zip(expect) {
            assert_eq!(seg.first_frame, first);
            assert_eq!(seg.length, length);
        }
    }
}
