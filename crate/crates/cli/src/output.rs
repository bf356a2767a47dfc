//! Pose streams and evaluation reports.

use std::io::{BufRead, Write};

use mmloc_core::eval::ErrorReport;
use mmloc_core::fusion::{ClockOffset, PipelineOutput, PipelineStats, Pose6DoF};
use mmloc_core::geometry::{EulerAngles, Point3};
use serde::{Deserialize, Serialize};

pub const POSES_SCHEMA_VERSION: u32 = 1;
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// One line of a pose file. Positions in meters, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PoseLine {
    Header {
        schema_version: u32,
    },
    Pose {
        timestamp: f64,
        x: f64,
        y: f64,
        z: f64,
        roll_deg: f64,
        pitch_deg: f64,
        yaw_deg: f64,
        quality: f64,
    },
    Stats {
        stats: PipelineStats,
        clock_offset: ClockOffset,
        calibration_error: Option<String>,
    },
}

pub fn write_poses<W: Write>(out: &PipelineOutput, mut w: W) -> std::io::Result<()> {
    let mut line = |l: &PoseLine| -> std::io::Result<()> {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n")
    };
    line(&PoseLine::Header { schema_version: POSES_SCHEMA_VERSION })?;
    for (pose, fix) in out.poses.iter().zip(&out.fixes) {
        let [roll_deg, pitch_deg, yaw_deg] = pose.euler().to_degrees();
        line(&PoseLine::Pose {
            timestamp: pose.timestamp,
            x: pose.position.x,
            y: pose.position.y,
            z: pose.position.z,
            roll_deg,
            pitch_deg,
            yaw_deg,
            quality: fix.quality,
        })?;
    }
    line(&PoseLine::Stats {
        stats: out.stats,
        clock_offset: out.clock_offset,
        calibration_error: out.calibration_error.clone(),
    })?;
    w.flush()
}

#[derive(Debug, Default)]
pub struct PoseFile {
    pub poses: Vec<Pose6DoF>,
    pub stats: Option<PipelineStats>,
}

pub fn read_poses<R: BufRead>(r: R) -> Result<PoseFile, String> {
    let mut out = PoseFile::default();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PoseLine = serde_json::from_str(&line).map_err(|e| format!("line {}: {e}", i + 1))?;
        match rec {
            PoseLine::Header { schema_version } => {
                if schema_version != POSES_SCHEMA_VERSION {
                    return Err(format!(
                        "unsupported pose schema version {schema_version} (this build reads {POSES_SCHEMA_VERSION})"
                    ));
                }
                saw_header = true;
            }
            _ if !saw_header => return Err("pose file does not start with a header".into()),
            PoseLine::Pose { timestamp, x, y, z, roll_deg, pitch_deg, yaw_deg, .. } => out.poses.push(Pose6DoF::new(
                timestamp,
                Point3::new(x, y, z),
                EulerAngles::from_degrees(roll_deg, pitch_deg, yaw_deg),
            )),
            PoseLine::Stats { stats, .. } => out.stats = Some(stats),
        }
    }
    if !saw_header {
        return Err("pose file is empty".into());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: ErrorReport,
}

impl ReportFile {
    pub fn new(report: ErrorReport) -> Self {
        Self { schema_version: REPORT_SCHEMA_VERSION, report }
    }
}
