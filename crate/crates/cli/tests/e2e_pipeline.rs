//! Full-surface end-to-end check: generate a ground-truthed synthetic
//! sequence on disk, drive the real binary over it, and evaluate the
//! trajectory it writes with the real evaluator.

use std::process::Command;

use rlo_core::geometry::Pose;
use rlo_core::kitti::{write_poses, write_scan};
use rlo_core::synthetic::noisy_constant_velocity_sequence;

#[test]
fn curved_sequence_stays_under_two_percent() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("seq");
    std::fs::create_dir_all(seq.join("velodyne")).unwrap();

    // 140 frames at 0.8 m/frame with a 0.3 deg/frame curve: 111 m of path,
    // enough for the 100 m evaluation segments
    let step = {
        let mut p = Pose::from_rotation_z(0.3_f64.to_radians());
        p.translation.x = 0.8;
        p
    };
    let frames = 140;
    let (scans, truth) =
        noisy_constant_velocity_sequence::<f64>(0xE2E, 3500, frames, &step, 0.1, 0.01);

    let mut times = String::new();
    for (k, scan) in scans.iter().enumerate() {
        write_scan(scan, seq.join(format!("velodyne/{k:06}.bin"))).unwrap();
        times.push_str(&format!("{:.6}\n", k as f64 * 0.1));
    }
    std::fs::write(seq.join("times.txt"), times).unwrap();
    let gt_path = dir.path().join("gt.txt");
    write_poses(&truth, &Pose::identity(), &gt_path).unwrap();

    let config = dir.path().join("config.toml");
    std::fs::write(&config, "").unwrap(); // all defaults

    let out = dir.path().join("out");
    let run = Command::new(env!("CARGO_BIN_EXE_rlo"))
        .arg("run")
        .args(["--sequence", seq.to_str().unwrap()])
        .args(["--config", config.to_str().unwrap()])
        .args(["--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "run failed: {}",
        String::from_utf8_lossy(&run.stderr)
    );

    let eval = Command::new(env!("CARGO_BIN_EXE_rlo"))
        .arg("eval")
        .args(["--est", out.join("poses.txt").to_str().unwrap()])
        .args(["--gt", gt_path.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(
        eval.status.success(),
        "eval failed: {}",
        String::from_utf8_lossy(&eval.stderr)
    );
    let stdout = String::from_utf8(eval.stdout).unwrap();
    let t_avg: f64 = stdout
        .trim()
        .split(" / ")
        .next()
        .unwrap()
        .parse()
        .unwrap_or_else(|_| panic!("unexpected eval output: {stdout}"));
    assert!(t_avg <= 2.0, "t_avg {t_avg:.2} % over the curved sequence");
}
