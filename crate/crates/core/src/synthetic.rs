//! Deterministic synthetic scenes and sequences.
//!
//! Used by the test suites and the CLI examples to exercise registration,
//! selection and the full pipeline with exact ground truth. Everything here
//! is seeded and reproducible bit-for-bit across runs and platforms, which
//! the determinism guarantees elsewhere in the crate rely on.

use nalgebra::{Point3, Vector3};

use crate::geometry::PointCloud;
use crate::geometry::Pose;
use crate::scalar::Real;

/// SplitMix64 PRNG. Small, seedable and stable; avoids pulling a randomness
/// dependency into the library for what the generators here need.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = (1.0 - self.next_f64()).max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// A structured LiDAR-like scene: ground plane, two side walls and a few
/// axis-aligned boxes. Surfaces in several orientations constrain all six
/// degrees of freedom, which pure planes would not. The extent keeps the
/// sampling dense enough that 1 m NDT cells stay above their point minimum
/// at the usual test sizes.
///
/// Points span roughly x ∈ [-ext, ext], y ∈ [-ext/2, ext/2], z ∈ [0, 3].
pub fn structured_scene<S: Real>(seed: u64, n_points: usize) -> PointCloud<S> {
    let mut rng = SplitMix64::new(seed);
    let ext = 10.0;
    // keep the large planes away from integer grid lines; a surface sitting
    // exactly on a 1 m cell boundary is a degenerate case real scans do not
    // produce
    let ground_z = 0.42;
    let wall_y = ext * 0.5 - 0.33;
    let mut points = Vec::with_capacity(n_points);

    // box poses are part of the scene layout, drawn before the surface
    // samples; boxes keep clear of the walls so no two parallel surfaces
    // end up inside one registration cell
    let n_boxes = 6;
    let boxes: Vec<(f64, f64, f64)> = (0..n_boxes)
        .map(|_| {
            let size = rng.uniform(0.8, 2.0);
            let y_max = wall_y - 1.2 - 0.5 * size;
            (
                rng.uniform(-ext * 0.8, ext * 0.8),
                rng.uniform(-y_max, y_max),
                size,
            )
        })
        .collect();

    while points.len() < n_points {
        let surface = rng.index(10);
        let p = match surface {
            // ground plane (40 % of samples)
            0..=3 => [
                rng.uniform(-ext, ext),
                rng.uniform(-ext * 0.5, ext * 0.5),
                ground_z,
            ],
            // left wall
            4 | 5 => [
                rng.uniform(-ext, ext),
                -wall_y,
                rng.uniform(ground_z, ground_z + 3.0),
            ],
            // right wall
            6 | 7 => [
                rng.uniform(-ext, ext),
                wall_y,
                rng.uniform(ground_z, ground_z + 3.0),
            ],
            // box faces
            _ => {
                let (bx, by, size) = boxes[rng.index(n_boxes)];
                let u = rng.uniform(-0.5, 0.5) * size;
                let v = ground_z + rng.uniform(0.0, size);
                match rng.index(3) {
                    0 => [bx + u, by + 0.5 * size, v], // face normal +y
                    1 => [bx + 0.5 * size, by + u, v], // face normal +x
                    _ => [bx + u, by - 0.5 * size, v], // face normal -y
                }
            }
        };
        points.push(Point3::new(
            S::from_config(p[0]),
            S::from_config(p[1]),
            S::from_config(p[2]),
        ));
    }
    PointCloud::new(points)
}

/// A small rigid transform drawn uniformly with translation norm at most
/// `max_translation` meters and rotation angle at most `max_rotation_deg`
/// degrees, about a random axis.
pub fn random_transform<S: Real>(
    seed: u64,
    max_translation: f64,
    max_rotation_deg: f64,
) -> Pose<S> {
    let mut rng = SplitMix64::new(seed ^ xt_bits());
    let dir = loop {
        let v = Vector3::new(
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
        );
        let n = v.norm();
        if n > 1e-3 {
            break v / n;
        }
    };
    let t = dir * rng.uniform(0.0, max_translation);
    let axis = loop {
        let v = Vector3::new(
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
            rng.uniform(-1.0, 1.0),
        );
        let n = v.norm();
        if n > 1e-3 {
            break v / n;
        }
    };
    let angle = rng.uniform(0.0, max_rotation_deg).to_radians();
    let w = axis * angle;
    Pose::from_rotvec_translation(
        &Vector3::new(
            S::from_config(w.x),
            S::from_config(w.y),
            S::from_config(w.z),
        ),
        &Vector3::new(
            S::from_config(t.x),
            S::from_config(t.y),
            S::from_config(t.z),
        ),
    )
}

/// Scans of a static [`structured_scene`] seen from a sensor moving at
/// constant velocity: `step` is the frame-to-frame motion in the sensor
/// frame. Returns `(scans, ground_truth_world_poses)`; scan `k` is the world
/// cloud expressed in sensor frame `k`, timestamps advance by `delta_tau`.
pub fn constant_velocity_sequence<S: Real>(
    seed: u64,
    n_points: usize,
    frames: usize,
    step: &Pose<S>,
    delta_tau: f64,
) -> (Vec<PointCloud<S>>, Vec<Pose<S>>) {
    noisy_constant_velocity_sequence(seed, n_points, frames, step, delta_tau, 0.0)
}

/// [`constant_velocity_sequence`] with independent per-frame Gaussian
/// measurement noise of the given standard deviation, meters.
pub fn noisy_constant_velocity_sequence<S: Real>(
    seed: u64,
    n_points: usize,
    frames: usize,
    step: &Pose<S>,
    delta_tau: f64,
    noise_sigma: f64,
) -> (Vec<PointCloud<S>>, Vec<Pose<S>>) {
    let world = structured_scene::<S>(seed, n_points);
    let mut poses = Vec::with_capacity(frames);
    let mut scans = Vec::with_capacity(frames);
    let mut pose = Pose::identity();
    for k in 0..frames {
        poses.push(pose);
        let mut scan = world
            .transformed(&pose.inverse())
            .with_timestamp(S::from_config(k as f64 * delta_tau));
        if noise_sigma > 0.0 {
            let mut rng = SplitMix64::new(seed ^ (k as u64).wrapping_mul(0x2545f4914f6cdd1d));
            let jittered = scan
                .points()
                .iter()
                .map(|p| {
                    Point3::new(
                        p.x + S::from_config(noise_sigma * rng.normal()),
                        p.y + S::from_config(noise_sigma * rng.normal()),
                        p.z + S::from_config(noise_sigma * rng.normal()),
                    )
                })
                .collect();
            scan = PointCloud::new(jittered).with_timestamp(scan.timestamp());
        }
        scans.push(scan);
        pose = pose.compose(step);
    }
    (scans, poses)
}

// arbitrary stream-separation constant for random_transform
fn xt_bits() -> u64 {
    0x9d3f_a55a_17c2_84d1
}
