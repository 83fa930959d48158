//! Physical-plausibility filters for transform proposals.
//!
//! Two independent checks run on every proposal: a dynamic bound on the
//! vehicle's acceleration and a kinematic bound on the lateral velocity an
//! Ackermann-steered vehicle can produce at the current forward speed and
//! turning rate. Both work on frame-to-frame transforms in the sensor frame
//! (x forward, y left, z up; yaw about +z).

use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::scalar::Real;

/// Below this per-frame yaw increment (`beta_dot / f`, radians) the
/// Ackermann formula is evaluated by its analytic limit instead; the closed
/// form degenerates to 0/0 there.
const SMALL_ANGLE: f64 = 1e-8;

/// Outcome of the sanity checks for one proposal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Untested,
    Passed,
    RejectedDynamic,
    RejectedKinematic,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Untested => "untested",
            Verdict::Passed => "passed",
            Verdict::RejectedDynamic => "rejected_dynamic",
            Verdict::RejectedKinematic => "rejected_kinematic",
        }
    }
}

impl std::str::FromStr for Verdict {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "untested" => Ok(Verdict::Untested),
            "passed" => Ok(Verdict::Passed),
            "rejected_dynamic" => Ok(Verdict::RejectedDynamic),
            "rejected_kinematic" => Ok(Verdict::RejectedKinematic),
            other => Err(format!("unknown sanity verdict `{other}`")),
        }
    }
}

/// Vehicle limits used by both checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleModel<S: Real = f64> {
    /// Distance from the rear axle to the sensor, meters.
    pub l: S,
    /// Maximum admissible acceleration, m/s².
    pub a_max: S,
    /// Maximum admissible side-velocity deviation, m/s.
    pub v_th: S,
}

impl<S: Real> Default for VehicleModel<S> {
    fn default() -> Self {
        VehicleModel {
            l: S::one(),
            a_max: S::from_config(6.0),
            v_th: S::from_config(0.8),
        }
    }
}

/// Velocities read off a frame-to-frame transform: the inputs to the
/// kinematic check and the series behind the motion diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicState<S: Real = f64> {
    /// Forward velocity from the last selected transform, m/s.
    pub v: S,
    /// Turning (yaw) rate of the proposal, rad/s.
    pub beta_dot: S,
    /// Lateral velocity of the proposal, m/s.
    pub v_star: S,
    /// Frame rate, Hz; `f = 1 / delta_tau`.
    pub f: S,
    /// Inter-frame time, seconds.
    pub delta_tau: S,
}

impl<S: Real> KinematicState<S> {
    /// Extracts the kinematic quantities of `proposal` over `delta_tau`
    /// seconds, with the forward velocity taken from the previous selected
    /// transform over its own interval.
    pub fn from_motion(
        prev_selected: &Pose<S>,
        prev_delta_tau: S,
        proposal: &Pose<S>,
        delta_tau: S,
    ) -> Self {
        KinematicState {
            v: prev_selected.translation.x / prev_delta_tau,
            beta_dot: proposal.yaw() / delta_tau,
            v_star: proposal.translation.y / delta_tau,
            f: S::one() / delta_tau,
            delta_tau,
        }
    }
}

/// Speed implied by a frame-to-frame transform: translation norm over the
/// frame interval. The norm (not the signed forward component) keeps the
/// dynamic check meaningful while reversing.
pub fn transform_speed<S: Real>(transform: &Pose<S>, delta_tau: S) -> S {
    transform.translation.norm() / delta_tau
}

/// Dynamic check: rejects a proposal whose speed change relative to the
/// previous selected transform implies more than `a_max` of acceleration.
///
/// `prev` is the previous selected transform with the interval it spans;
/// `None` (no evaluable history yet) passes, the scoring stage still
/// arbitrates.
pub fn check_acceleration<S: Real>(
    prev: Option<(&Pose<S>, S)>,
    proposal: &Pose<S>,
    delta_tau: S,
    model: &VehicleModel<S>,
) -> Verdict {
    let Some((prev_transform, prev_delta_tau)) = prev else {
        return Verdict::Passed;
    };
    let accel = acceleration_estimate(prev_transform, prev_delta_tau, proposal, delta_tau);
    if accel > model.a_max {
        Verdict::RejectedDynamic
    } else {
        Verdict::Passed
    }
}

/// |speed_new - speed_prev| / delta_tau, the quantity the dynamic check
/// bounds. Exposed separately for the trace diagnostics.
pub fn acceleration_estimate<S: Real>(
    prev_transform: &Pose<S>,
    prev_delta_tau: S,
    proposal: &Pose<S>,
    delta_tau: S,
) -> S {
    let speed_prev = transform_speed(prev_transform, prev_delta_tau);
    let speed_new = transform_speed(proposal, delta_tau);
    (speed_new - speed_prev).abs() / delta_tau
}

/// Side velocity of the sensor under the Ackermann model at forward speed
/// `v` and turning rate `beta_dot`, sampled at frame rate `f`.
///
/// Grouping: the frame rate multiplies the whole bracket,
/// `v_s = f * [ ((v/f + l(1-cos(β/f))) / sin(β/f)) * (1-cos(β/f)) + l*sin(β/f) ]`,
/// which tends to `l*β̇` as `β̇ → 0`, the lateral velocity of a sensor
/// mounted `l` ahead of the rear axle. Below `|β̇/f| = 1e-8` that limit is
/// returned directly.
pub fn ackermann_side_velocity<S: Real>(beta_dot: S, v: S, model: &VehicleModel<S>, f: S) -> S {
    let x = beta_dot / f;
    if x.abs() < S::from_config(SMALL_ANGLE) {
        return model.l * beta_dot;
    }
    let one = S::one();
    let sin_x = x.sin();
    let vers_x = one - x.cos();
    f * ((v / f + model.l * vers_x) / sin_x * vers_x + model.l * sin_x)
}

/// Kinematic check: rejects a proposal whose lateral velocity deviates from
/// the Ackermann side velocity by more than `v_th`.
///
/// `prev` as in [`check_acceleration`]; without an evaluable previous
/// interval the check passes.
pub fn check_kinematics<S: Real>(
    proposal: &Pose<S>,
    prev: Option<(&Pose<S>, S)>,
    delta_tau: S,
    model: &VehicleModel<S>,
) -> Verdict {
    let Some((prev_transform, prev_delta_tau)) = prev else {
        return Verdict::Passed;
    };
    let state = KinematicState::from_motion(prev_transform, prev_delta_tau, proposal, delta_tau);
    let v_s = ackermann_side_velocity(state.beta_dot, state.v, model, state.f);
    if (v_s - state.v_star).abs() > model.v_th {
        Verdict::RejectedKinematic
    } else {
        Verdict::Passed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> VehicleModel<f64> {
        VehicleModel::default() // l = 1.0, a_max = 6.0, v_th = 0.8
    }

    fn forward(meters: f64) -> Pose<f64> {
        Pose::from_translation(meters, 0.0, 0.0)
    }

    #[test]
    fn acceleration_within_bound_passes() {
        // 10 m/s then 10.5 m/s over 0.1 s: 5 m/s² <= 6
        let v = check_acceleration(Some((&forward(1.0), 0.1)), &forward(1.05), 0.1, &model());
        assert_eq!(v, Verdict::Passed);
    }

    #[test]
    fn acceleration_beyond_bound_rejects() {
        // 10 m/s then 11 m/s over 0.1 s: 10 m/s² > 6
        let v = check_acceleration(Some((&forward(1.0), 0.1)), &forward(1.1), 0.1, &model());
        assert_eq!(v, Verdict::RejectedDynamic);
    }

    #[test]
    fn identical_transforms_have_zero_acceleration() {
        // the constant-velocity proposal always lands here
        let v = check_acceleration(Some((&forward(1.0), 0.1)), &forward(1.0), 0.1, &model());
        assert_eq!(v, Verdict::Passed);
        assert_eq!(
            acceleration_estimate(&forward(1.0), 0.1, &forward(1.0), 0.1),
            0.0
        );
    }

    #[test]
    fn missing_history_passes() {
        assert_eq!(
            check_acceleration(None, &forward(5.0), 0.1, &model()),
            Verdict::Passed
        );
        assert_eq!(
            check_kinematics(&forward(5.0), None, 0.1, &model()),
            Verdict::Passed
        );
    }

    #[test]
    fn side_velocity_is_zero_without_turning() {
        let m = model();
        assert_eq!(ackermann_side_velocity(0.0, 10.0, &m, 10.0), 0.0);
        assert_eq!(ackermann_side_velocity(0.0, 0.0, &m, 10.0), 0.0);
    }

    #[test]
    fn side_velocity_matches_independent_evaluation() {
        // Independent oracle: the same physics derived through the turning
        // radius. The chord the rear axle travels per frame has length v/f
        // and heading change x = β̇/f, so the radius recovered from the
        // forward displacement is r = (v/f + l(1-cos x)) / sin x and the
        // lateral displacement per frame is r(1-cos x) + l sin x.
        // Frozen value computed with 40-digit arithmetic.
        let m = model();
        let v_s = ackermann_side_velocity(0.2, 10.0, &m, 10.0);
        // 1 - cos(0.02) costs ~3 decimal digits, hence the 1e-12 slack
        let frozen = 0.3000100004000162;
        assert!((v_s - frozen).abs() < 1e-12, "v_s = {v_s:.16}");

        let x: f64 = 0.2 / 10.0;
        let r = (10.0 / 10.0 + m.l * (1.0 - x.cos())) / x.sin();
        let oracle = 10.0 * (r * (1.0 - x.cos()) + m.l * x.sin());
        assert!((v_s - oracle).abs() < 1e-12);
    }

    #[test]
    fn side_velocity_is_continuous_at_zero_turn_rate() {
        // |v_s(β̇) - l·β̇| <= 1e-6 (1 + |v|); the closed form deviates from
        // the limit by v·β̇/(2f), which bounds the (v, f) pairs that can be
        // probed at each β̇.
        let m = model();
        for &beta_dot in &[1e-6, -1e-6] {
            for &v in &[0.0, 1.0, 10.0] {
                let vs = ackermann_side_velocity(beta_dot, v, &m, 10.0);
                assert!((vs - m.l * beta_dot).abs() <= 1e-6 * (1.0 + v.abs()));
            }
        }
        for &beta_dot in &[1e-4, -1e-4] {
            for &(v, f) in &[(0.0, 10.0), (1.0, 100.0), (10.0, 100.0)] {
                let vs = ackermann_side_velocity(beta_dot, v, &m, f);
                assert!((vs - m.l * beta_dot).abs() <= 1e-6 * (1.0 + v.abs()));
            }
        }
        // both sides of the small-angle cutoff obey the same bound; at v = 0
        // the closed form and the limit agree to machine precision there
        for &v in &[0.0, 10.0] {
            for &beta_dot in &[1e-8 * 10.0 * 0.99, 1e-8 * 10.0 * 1.01] {
                let vs = ackermann_side_velocity(beta_dot, v, &m, 10.0);
                assert!((vs - m.l * beta_dot).abs() <= 1e-6 * (1.0 + v));
            }
        }
        for &beta_dot in &[1e-8 * 10.0 * 0.99, 1e-8 * 10.0 * 1.01] {
            let vs = ackermann_side_velocity(beta_dot, 0.0, &m, 10.0);
            assert!((vs - m.l * beta_dot).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_motion_passes_kinematics() {
        let v = check_kinematics(&forward(1.0), Some((&forward(1.0), 0.1)), 0.1, &model());
        assert_eq!(v, Verdict::Passed);
    }

    #[test]
    fn lateral_jump_is_rejected() {
        // 0.2 m sideways at 0.1 s is v* = 2 m/s against v_s = 0: |0-2| > 0.8
        let proposal = Pose::from_translation(1.0, 0.2, 0.0);
        let v = check_kinematics(&proposal, Some((&forward(1.0), 0.1)), 0.1, &model());
        assert_eq!(v, Verdict::RejectedKinematic);
    }

    #[test]
    fn verdict_is_monotone_in_threshold() {
        let proposal = Pose::from_translation(1.0, 0.05, 0.0);
        let prev = forward(1.0);
        let mut last_passed = false;
        for i in 0..20 {
            let mut m = model();
            m.v_th = 0.05 + 0.05 * i as f64;
            let passed =
                check_kinematics(&proposal, Some((&prev, 0.1)), 0.1, &m) == Verdict::Passed;
            if last_passed {
                assert!(passed, "passing proposal must keep passing at larger v_th");
            }
            last_passed = passed;
        }
    }

    #[test]
    fn acceleration_scales_with_frame_time() {
        // same displacement, doubled Δτ: velocities halve, acceleration
        // quarters
        let prev = forward(1.0);
        let prop = forward(1.2);
        let a1 = acceleration_estimate(&prev, 0.1, &prop, 0.1);
        let a2 = acceleration_estimate(&prev, 0.2, &prop, 0.2);
        assert!((a1 / 4.0 - a2).abs() < 1e-12);
    }

    #[test]
    fn replayed_transform_reproduces_its_verdict() {
        // a transform that passed at frame k, replayed at frame k+1 with the
        // same Δτ, yields the same v_s/v* pair and the same verdict
        let mut rng = crate::synthetic::SplitMix64::new(21);
        for _ in 0..100 {
            let t = Pose::from_rotation_z(rng.uniform(-0.02, 0.02));
            let t = Pose::new(
                t.rotation,
                nalgebra::Vector3::new(
                    rng.uniform(0.0, 1.5),
                    rng.uniform(-0.05, 0.05),
                    rng.uniform(-0.01, 0.01),
                ),
            );
            let dt = 0.1;
            let first = check_kinematics(&t, Some((&t, dt)), dt, &model());
            let replay = check_kinematics(&t, Some((&t, dt)), dt, &model());
            assert_eq!(first, replay);
            let acc = check_acceleration(Some((&t, dt)), &t, dt, &model());
            assert_eq!(acc, Verdict::Passed);
        }
    }
}
