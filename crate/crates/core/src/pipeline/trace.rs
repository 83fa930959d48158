use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::registration::EstimatorId;
use crate::sanity::Verdict;

/// One row of the per-frame trace: a single proposal with its verdicts,
/// score and motion diagnostics, plus the world position committed for the
/// frame. Each frame emits one row per proposal.
///
/// The CSV starts with the interface columns `frame_index, timestamp,
/// method, converged, sanity_verdict, chamfer, selected`; the remaining
/// columns are the diagnostics series behind the plot exports (per-proposal
/// speed, acceleration, yaw rate and lateral velocity, then the committed
/// world position).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub frame_index: usize,
    pub timestamp: f64,
    pub method: EstimatorId,
    pub converged: bool,
    pub sanity: Verdict,
    pub chamfer: Option<f64>,
    pub selected: bool,
    /// Speed implied by this proposal, m/s.
    pub speed: f64,
    /// Acceleration against the previous selected transform, m/s²; absent
    /// before two intervals exist.
    pub accel: Option<f64>,
    /// Yaw rate of this proposal, rad/s.
    pub yaw_rate: f64,
    /// Lateral velocity of this proposal, m/s.
    pub lat_vel: f64,
    /// World position after this frame's commit (same for all rows of the
    /// frame).
    pub wx: f64,
    pub wy: f64,
    pub wz: f64,
}

pub const TRACE_HEADER: &str =
    "frame_index,timestamp,method,converged,sanity_verdict,chamfer,selected,speed,accel,yaw_rate,lat_vel,wx,wy,wz";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

pub fn write_trace_csv(records: &[TraceRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.frame_index,
            r.timestamp,
            r.method,
            r.converged as u8,
            r.sanity.as_str(),
            fmt_opt(r.chamfer),
            r.selected as u8,
            r.speed,
            fmt_opt(r.accel),
            r.yaw_rate,
            r.lat_vel,
            r.wx,
            r.wy,
            r.wz,
        )?;
    }
    Ok(())
}

pub fn write_trace_file(records: &[TraceRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(records, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut records = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if lineno == 0 {
            if line != TRACE_HEADER {
                return Err(Error::format(path, "line 1: unexpected trace header"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        records.push(
            parse_row(&line)
                .map_err(|msg| Error::format(path, format!("line {}: {msg}", lineno + 1)))?,
        );
    }
    Ok(records)
}

fn parse_row(line: &str) -> std::result::Result<TraceRecord, String> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 14 {
        return Err(format!("expected 14 fields, found {}", fields.len()));
    }
    let num = |i: usize| -> std::result::Result<f64, String> {
        fields[i]
            .parse::<f64>()
            .map_err(|_| format!("field {}: invalid number `{}`", i + 1, fields[i]))
    };
    let opt_num = |i: usize| -> std::result::Result<Option<f64>, String> {
        if fields[i].is_empty() {
            Ok(None)
        } else {
            num(i).map(Some)
        }
    };
    let flag = |i: usize| -> std::result::Result<bool, String> {
        match fields[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(format!("field {}: expected 0 or 1, found `{other}`", i + 1)),
        }
    };
    Ok(TraceRecord {
        frame_index: fields[0]
            .parse::<usize>()
            .map_err(|_| format!("field 1: invalid frame index `{}`", fields[0]))?,
        timestamp: num(1)?,
        method: fields[2]
            .parse::<EstimatorId>()
            .map_err(|e| format!("field 3: {e}"))?,
        converged: flag(3)?,
        sanity: fields[4]
            .parse::<Verdict>()
            .map_err(|e| format!("field 5: {e}"))?,
        chamfer: opt_num(5)?,
        selected: flag(6)?,
        speed: num(7)?,
        accel: opt_num(8)?,
        yaw_rate: num(9)?,
        lat_vel: num(10)?,
        wx: num(11)?,
        wy: num(12)?,
        wz: num(13)?,
    })
}
