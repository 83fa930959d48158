use std::fmt::Write as _;

use rlo_core::error::{Error, Result};
use rlo_core::evaluation;
use rlo_core::kitti::{read_poses, read_scan, write_poses, KittiSequence};
use rlo_core::pipeline::{run_sequence, write_trace_file, PipelineConfig, TraceRecord};
use rlo_core::EstimatorId;

use crate::{EvalArgs, PlotdataArgs, RunArgs};

pub fn run(args: &RunArgs) -> Result<()> {
    let mut cfg: PipelineConfig = PipelineConfig::load(&args.config)?;
    if let Some(subset) = &args.estimators {
        cfg.enabled_estimators = subset.clone();
        cfg.validate()?;
    }
    let sequence = KittiSequence::load(&args.sequence)?;
    let rate = cfg.default_frame_rate;

    let scans = sequence.scan_paths.iter().enumerate().map(|(k, path)| {
        let ts = sequence.timestamp(k, rate);
        read_scan::<f64>(path).map(|cloud| (cloud.with_timestamp(ts), ts))
    });
    let run = run_sequence(scans, &cfg)?;

    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    write_poses(
        run.history.world_poses(),
        &sequence.calib_tr,
        args.out.join("poses.txt"),
    )?;
    write_trace_file(&run.trace, args.out.join("trace.csv"))?;

    let summary = run_summary(&run.trace, run.history.len());
    let summary_path = args.out.join("summary.txt");
    std::fs::write(&summary_path, &summary).map_err(|e| Error::io(&summary_path, e))?;
    print!("{summary}");
    Ok(())
}

/// Frame count and per-estimator pick counts, fixed formatting so reruns
/// are byte-identical.
fn run_summary(trace: &[TraceRecord], frames: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "frames: {frames}");
    let _ = writeln!(out, "picks:");
    for id in EstimatorId::ALL {
        let picks = trace
            .iter()
            .filter(|r| r.selected && r.method == id)
            .count();
        if picks > 0 {
            let percent = 100.0 * picks as f64 / frames as f64;
            let _ = writeln!(out, "  {id}: {picks} ({percent:.1}%)");
        }
    }
    out
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let est = read_poses::<f64>(&args.est)?;
    let gt = read_poses::<f64>(&args.gt)?;
    let summary = evaluation::evaluate(&est, &gt)?;

    match (summary.t_avg_percent, summary.r_avg_deg_per_100m) {
        (Some(t), Some(r)) => println!("{t:.2} / {r:.4}"),
        _ => println!("undefined / undefined (trajectory shorter than the smallest segment)"),
    }

    if let Some(csv) = &args.csv {
        let mut out = String::from("first_frame,length,t_err,r_err\n");
        for seg in &summary.segments {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                seg.first_frame, seg.length, seg.t_err, seg.r_err
            );
        }
        std::fs::write(csv, out).map_err(|e| Error::io(csv, e))?;
    }
    Ok(())
}

pub fn plotdata(args: &PlotdataArgs) -> Result<()> {
    let trace = rlo_core::pipeline::read_trace_file(&args.trace)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;

    let method_index = |id: EstimatorId| {
        EstimatorId::ALL
            .iter()
            .position(|&x| x == id)
            .expect("known estimator")
    };

    // per-frame chosen method (selection frequency data)
    let mut selection = String::from("# frame method_index method\n");
    // committed trajectory
    let mut trajectory = String::from("# frame x y z\n");
    // forward velocity of the selected transform
    let mut velocity = String::from("# frame speed_mps\n");
    for r in trace.iter().filter(|r| r.selected) {
        let _ = writeln!(
            selection,
            "{} {} {}",
            r.frame_index,
            method_index(r.method),
            r.method
        );
        let _ = writeln!(trajectory, "{} {} {} {}", r.frame_index, r.wx, r.wy, r.wz);
        let _ = writeln!(velocity, "{} {}", r.frame_index, r.speed);
    }

    // acceleration of every proposal, before sanity filtering
    let mut accel_raw = String::from("# frame method_index accel_mps2\n");
    // and of the proposals that survived the checks
    let mut accel_filtered = String::from("# frame method_index accel_mps2\n");
    for r in &trace {
        let Some(accel) = r.accel else { continue };
        let line = format!("{} {} {}\n", r.frame_index, method_index(r.method), accel);
        accel_raw.push_str(&line);
        if r.sanity == rlo_core::Verdict::Passed {
            accel_filtered.push_str(&line);
        }
    }

    for (name, content) in [
        ("selection.dat", selection),
        ("trajectory.dat", trajectory),
        ("velocity.dat", velocity),
        ("acceleration_raw.dat", accel_raw),
        ("acceleration_filtered.dat", accel_filtered),
    ] {
        let path = args.out.join(name);
        std::fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
