//! KITTI odometry ingestion and trajectory export.
//!
//! Velodyne scans are little-endian `f32` quadruples `(x, y, z,
//! reflectance)` in meters; pose files hold one row-major 3×4 `[R|t]` matrix
//! per line; `calib.txt` carries the Velodyne-to-left-camera transform on
//! its `Tr:` line; `times.txt` one decimal seconds value per line.

use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Pose};
use crate::scalar::Real;

const RECORD_BYTES: usize = 16;

/// One KITTI odometry sequence directory: `velodyne/*.bin` plus optional
/// `times.txt`, `calib.txt` and `poses.txt`.
#[derive(Debug, Clone)]
pub struct KittiSequence {
    pub scan_paths: Vec<PathBuf>,
    pub timestamps: Option<Vec<f64>>,
    /// Velodyne-to-left-camera transform (`Tr`); identity when the sequence
    /// ships no calibration, leaving exported poses in the sensor frame.
    pub calib_tr: Pose<f64>,
    /// Ground-truth camera-frame poses, when present.
    pub ground_truth: Option<Vec<Pose<f64>>>,
}

impl KittiSequence {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let velodyne = dir.join("velodyne");
        let mut scan_paths: Vec<PathBuf> = std::fs::read_dir(&velodyne)
            .map_err(|e| Error::io(&velodyne, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "bin"))
            .collect();
        scan_paths.sort();
        if scan_paths.is_empty() {
            return Err(Error::format(&velodyne, "no .bin scans found"));
        }

        let times_path = dir.join("times.txt");
        let timestamps = if times_path.exists() {
            let times = read_times(&times_path)?;
            if times.len() != scan_paths.len() {
                return Err(Error::format(
                    &times_path,
                    format!("{} timestamps for {} scans", times.len(), scan_paths.len()),
                ));
            }
            Some(times)
        } else {
            None
        };

        let calib_path = dir.join("calib.txt");
        let calib_tr = if calib_path.exists() {
            read_calib(&calib_path)?
        } else {
            Pose::identity()
        };

        let poses_path = dir.join("poses.txt");
        let ground_truth = if poses_path.exists() {
            let poses = read_poses(&poses_path)?;
            if poses.len() != scan_paths.len() {
                return Err(Error::format(
                    &poses_path,
                    format!("{} poses for {} scans", poses.len(), scan_paths.len()),
                ));
            }
            Some(poses)
        } else {
            None
        };

        Ok(KittiSequence {
            scan_paths,
            timestamps,
            calib_tr,
            ground_truth,
        })
    }

    pub fn scan_count(&self) -> usize {
        self.scan_paths.len()
    }

    /// Timestamp of frame `k`, synthesized from the default frame rate when
    /// the sequence ships no `times.txt`.
    pub fn timestamp(&self, k: usize, default_frame_rate: f64) -> f64 {
        match &self.timestamps {
            Some(times) => times[k],
            None => k as f64 / default_frame_rate,
        }
    }
}

/// Parses a Velodyne `.bin` scan. The file length must be a multiple of 16
/// bytes; reflectance goes into the optional channel.
pub fn read_scan<S: Real>(path: impl AsRef<Path>) -> Result<PointCloud<S>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(Error::format(
            path,
            format!(
                "truncated record at byte offset {}",
                bytes.len() - bytes.len() % RECORD_BYTES
            ),
        ));
    }
    let n = bytes.len() / RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut reflectance = Vec::with_capacity(n);
    for rec in bytes.chunks_exact(RECORD_BYTES) {
        let f = |i: usize| {
            let v = f32::from_le_bytes([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]);
            S::from_f32(v).expect("f32 fits every supported scalar")
        };
        points.push(Point3::new(f(0), f(4), f(8)));
        reflectance.push(f(12));
    }
    PointCloud::new(points).with_reflectance(reflectance)
}

/// Writes a cloud in the Velodyne `.bin` layout (used for synthetic
/// sequences). A missing reflectance channel writes zeros.
pub fn write_scan<S: Real>(cloud: &PointCloud<S>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for (i, p) in cloud.points().iter().enumerate() {
        let r = cloud.reflectance().map(|r| r[i]).unwrap_or_else(S::zero);
        for v in [p.x, p.y, p.z, r] {
            let v = v.to_f32().expect("finite coordinate");
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One decimal seconds value per line, strictly increasing.
pub fn read_times(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut times = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let t: f64 = line.parse().map_err(|_| {
            Error::format(
                path,
                format!("line {}: invalid timestamp `{line}`", lineno + 1),
            )
        })?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::format(
                    path,
                    format!(
                        "line {}: timestamps must be strictly increasing",
                        lineno + 1
                    ),
                ));
            }
        }
        times.push(t);
    }
    Ok(times)
}

/// Extracts the `Tr:` entry of a KITTI `calib.txt`. The rotation block is
/// re-orthonormalized: calibration files carry few digits and the transform
/// is used for frame conjugation, which needs a valid rigid pose.
pub fn read_calib(path: impl AsRef<Path>) -> Result<Pose<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (lineno, line) in text.lines().enumerate() {
        let Some(rest) = line.strip_prefix("Tr:") else {
            continue;
        };
        let pose = parse_pose_row(rest)
            .map_err(|msg| Error::format(path, format!("line {}: {msg}", lineno + 1)))?;
        return Ok(pose.renormalized());
    }
    Err(Error::format(path, "no `Tr:` line found"))
}

/// KITTI pose file: one row-major 3×4 matrix (12 decimals) per line.
pub fn read_poses<S: Real>(path: impl AsRef<Path>) -> Result<Vec<Pose<S>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut poses = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pose: Pose<f64> = parse_pose_row(line)
            .map_err(|msg| Error::format(path, format!("line {}: {msg}", lineno + 1)))?;
        poses.push(convert_pose(&pose));
    }
    Ok(poses)
}

fn parse_pose_row(line: &str) -> std::result::Result<Pose<f64>, String> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| format!("invalid number `{tok}`"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != 12 {
        return Err(format!("expected 12 values, found {}", values.len()));
    }
    let rotation = Matrix3::new(
        values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9],
        values[10],
    );
    let translation = Vector3::new(values[3], values[7], values[11]);
    Ok(Pose::new(rotation, translation))
}

fn convert_pose<S: Real>(pose: &Pose<f64>) -> Pose<S> {
    Pose::new(
        pose.rotation.map(|v| S::from_config(v)),
        pose.translation.map(|v| S::from_config(v)),
    )
}

fn pose_to_f64<S: Real>(pose: &Pose<S>) -> Pose<f64> {
    Pose::new(
        pose.rotation.map(|v| v.to_f64().expect("finite rotation")),
        pose.translation
            .map(|v| v.to_f64().expect("finite translation")),
    )
}

/// Writes world poses in the KITTI format, conjugated into the camera frame
/// (`Tr ∘ pose ∘ Tr⁻¹`), one 3×4 row per frame at 9 significant digits.
pub fn write_poses<S: Real>(
    world_poses: &[Pose<S>],
    calib: &Pose<S>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if world_poses.is_empty() {
        return Err(Error::invalid("refusing to write an empty pose file"));
    }
    let calib = pose_to_f64(calib);
    let calib_inv = calib.inverse();
    let mut out = String::with_capacity(world_poses.len() * 220);
    for pose in world_poses {
        let cam = calib.compose(&pose_to_f64(pose)).compose(&calib_inv);
        let r = &cam.rotation;
        let t = &cam.translation;
        let row = [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
        ];
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&format!("{v:.8e}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
