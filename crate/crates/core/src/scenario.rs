//! Flight scenarios and the simulator that turns them into measurement logs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{simulate_frame, AnchorConfig, BasebandFrame, NoiseModel, RadarConfig, RadarId};
use crate::config::RunConfig;
use crate::fusion::{ImuSample, Pose6DoF};
use crate::geometry::{euler_to_rotation, rotation_to_euler, wrap_angle, EulerAngles, Point3};

pub const SCHEMA_VERSION: u32 = 1;

/// RNG stream reserved for chirp timing jitter; frame noise uses streams
/// `0..2 * frames_per_radar`.
const TIMING_STREAM: u64 = u64::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid scenario:\n  {}", .0.join("\n  "))]
pub struct ScenarioError(pub Vec<String>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub time: f64,
    pub position: Point3,
    pub attitude: EulerAngles,
}

/// Drone motion in the anchor frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Hover { position: Point3, attitude: EulerAngles },
    /// Constant velocity from `start` to `end` over the scenario duration.
    Line { start: Point3, end: Point3, attitude: EulerAngles },
    /// Horizontal circle. With `face_anchor` the yaw keeps the radar
    /// boresight pointed at the anchor.
    Circle { center: Point3, radius: f64, period: f64, face_anchor: bool, attitude: EulerAngles },
    /// Linear interpolation between keyframes, held constant outside them.
    Waypoints { points: Vec<Waypoint> },
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::Hover { position: Point3::new(0.0, -2.0, 0.0), attitude: EulerAngles::default() }
    }
}

/// One full sine cycle of yaw added on top of the trajectory attitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YawManeuver {
    pub start: f64,
    pub period: f64,
    pub amplitude_deg: f64,
}

impl YawManeuver {
    pub fn yaw_at(&self, t: f64) -> f64 {
        let s = (t - self.start) / self.period;
        if (0.0..=1.0).contains(&s) {
            self.amplitude_deg.to_radians() * (2.0 * PI * s).sin()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarTiming {
    /// Chirps per second.
    pub chirp_rate: f64,
    /// Time of the first chirp, seconds.
    pub start: f64,
    /// Half-width of the uniform timestamp jitter, seconds.
    pub jitter: f64,
}

impl Default for RadarTiming {
    fn default() -> Self {
        Self { chirp_rate: 20.0, start: 0.005, jitter: 0.5e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub duration: f64,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub yaw_maneuver: Option<YawManeuver>,
    pub radar_h: RadarConfig,
    pub radar_v: RadarConfig,
    pub anchor: AnchorConfig,
    pub noise_power: f64,
    /// Rotation of the drone world frame relative to the anchor frame.
    pub anchor_mount: EulerAngles,
    pub timing_h: RadarTiming,
    pub timing_v: RadarTiming,
    pub imu_rate: f64,
    /// IMU clock minus radar clock, seconds.
    pub imu_offset: f64,
    pub truth_rate: f64,
    /// Half-angle of the radar field-of-view cone, degrees.
    pub fov_half_angle_deg: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            duration: 10.0,
            seed: 0,
            trajectory: Trajectory::default(),
            yaw_maneuver: None,
            radar_h: RadarConfig::horizontal(),
            radar_v: RadarConfig::vertical(),
            anchor: AnchorConfig::default(),
            noise_power: 0.0,
            anchor_mount: EulerAngles::default(),
            timing_h: RadarTiming::default(),
            timing_v: RadarTiming { start: 0.015, ..RadarTiming::default() },
            imu_rate: 100.0,
            imu_offset: 0.0,
            truth_rate: 200.0,
            fov_half_angle_deg: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub seed: u64,
    /// The scenario the log was simulated from, when known.
    pub scenario: Option<Scenario>,
}

impl Default for LogHeader {
    fn default() -> Self {
        Self { schema_version: SCHEMA_VERSION, seed: 0, scenario: None }
    }
}

/// Everything recorded during one flight.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementLog {
    pub header: LogHeader,
    /// Frames of both radars, sorted by timestamp.
    pub frames: Vec<BasebandFrame>,
    /// IMU attitude in IMU clock, sorted by timestamp.
    pub imu: Vec<ImuSample>,
    /// Dense ground-truth poses in the anchor frame.
    pub truth: Vec<Pose6DoF>,
}

fn sample_times(rate: f64, duration: f64) -> impl Iterator<Item = f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n).map(move |i| i as f64 / rate)
}

impl Scenario {
    /// Ground-truth pose at time `t`.
    pub fn pose_at(&self, t: f64) -> Pose6DoF {
        let s = if self.duration > 0.0 { (t / self.duration).clamp(0.0, 1.0) } else { 0.0 };
        let (position, mut attitude) = match &self.trajectory {
            Trajectory::Hover { position, attitude } => (*position, *attitude),
            Trajectory::Line { start, end, attitude } => (start.lerp(end, s), *attitude),
            Trajectory::Circle { center, radius, period, face_anchor, attitude } => {
                let a = 2.0 * PI * t / period;
                let p = *center + Point3::new(radius * a.cos(), radius * a.sin(), 0.0);
                let mut att = *attitude;
                if *face_anchor {
                    let d = self.anchor.position - p;
                    att.yaw = wrap_angle(att.yaw + (-d.x).atan2(d.y));
                }
                (p, att)
            }
            Trajectory::Waypoints { points } => waypoint_pose(points, t),
        };
        if let Some(m) = &self.yaw_maneuver {
            attitude.yaw = wrap_angle(attitude.yaw + m.yaw_at(t));
        }
        Pose6DoF::new(t, position, attitude)
    }

    fn timing(&self, id: RadarId) -> &RadarTiming {
        match id {
            RadarId::H => &self.timing_h,
            RadarId::V => &self.timing_v,
        }
    }

    fn radar(&self, id: RadarId) -> &RadarConfig {
        match id {
            RadarId::H => &self.radar_h,
            RadarId::V => &self.radar_v,
        }
    }

    /// Nominal chirp times of one radar before jitter.
    pub fn chirp_times(&self, id: RadarId) -> Vec<f64> {
        let tm = self.timing(id);
        let mut out = Vec::new();
        let mut k = 0usize;
        loop {
            let t = tm.start + k as f64 / tm.chirp_rate;
            if !(t < self.duration) {
                break;
            }
            out.push(t);
            k += 1;
        }
        out
    }

    /// Largest anchor distance along the ground-truth track.
    pub fn max_range(&self) -> f64 {
        sample_times(self.truth_rate, self.duration)
            .map(|t| self.pose_at(t).position.distance(&self.anchor.position))
            .fold(0.0, f64::max)
    }

    /// Processing configuration matching this scenario's hardware.
    pub fn run_config(&self) -> RunConfig {
        let base = RunConfig::default();
        let needed = (self.max_range() * 1.1 * 2.0).ceil() / 2.0;
        RunConfig {
            radar_h: self.radar_h.clone(),
            radar_v: self.radar_v.clone(),
            anchor: self.anchor.clone(),
            anchor_mount: self.anchor_mount,
            max_range: base.max_range.max(needed),
            ..base
        }
    }

    /// Every violated constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            out.push(format!("duration: must be > 0 (got {})", self.duration));
        }
        if !(self.noise_power >= 0.0 && self.noise_power.is_finite()) {
            out.push(format!("noise_power: must be >= 0 (got {})", self.noise_power));
        }
        for (name, tm) in [("timing_h", &self.timing_h), ("timing_v", &self.timing_v)] {
            if !(tm.chirp_rate > 0.0 && tm.chirp_rate.is_finite()) {
                out.push(format!("{name}.chirp_rate: must be > 0 (got {})", tm.chirp_rate));
            } else if !(tm.jitter >= 0.0 && tm.jitter < 0.25 / tm.chirp_rate) {
                out.push(format!("{name}.jitter: must be in [0, a quarter chirp period) (got {})", tm.jitter));
            }
            if !(tm.start >= 0.0 && tm.start.is_finite()) {
                out.push(format!("{name}.start: must be >= 0 (got {})", tm.start));
            }
        }
        if !(self.imu_rate > 0.0 && self.imu_rate.is_finite()) {
            out.push(format!("imu_rate: must be > 0 (got {})", self.imu_rate));
        }
        if !self.imu_offset.is_finite() {
            out.push("imu_offset: must be finite".into());
        }
        if !(self.truth_rate >= 100.0 && self.truth_rate.is_finite()) {
            out.push(format!("truth_rate: must be >= 100 Hz (got {})", self.truth_rate));
        }
        if !(self.fov_half_angle_deg > 0.0 && self.fov_half_angle_deg < 90.0) {
            out.push(format!("fov_half_angle_deg: must be in (0, 90) (got {})", self.fov_half_angle_deg));
        }
        if !self.anchor_mount.is_finite() {
            out.push("anchor_mount: must be finite".into());
        }
        match &self.trajectory {
            Trajectory::Circle { radius, period, .. } => {
                if !(*radius >= 0.0) {
                    out.push("trajectory.radius: must be >= 0".into());
                }
                if !(*period > 0.0) {
                    out.push("trajectory.period: must be > 0".into());
                }
            }
            Trajectory::Waypoints { points } => {
                if points.is_empty() {
                    out.push("trajectory.points: need at least one waypoint".into());
                }
                if points.windows(2).any(|w| !(w[1].time > w[0].time)) {
                    out.push("trajectory.points: waypoint times must be strictly increasing".into());
                }
            }
            _ => {}
        }
        if let Some(m) = &self.yaw_maneuver {
            if !(m.period > 0.0) {
                out.push("yaw_maneuver.period: must be > 0".into());
            }
        }
        if !out.is_empty() {
            return out;
        }

        let fov = self.fov_half_angle_deg.to_radians();
        for t in sample_times(self.truth_rate, self.duration) {
            let pose = self.pose_at(t);
            let local = pose.attitude.transpose() * (self.anchor.position - pose.position);
            let r = local.norm();
            if !(r > 0.0) || !((local.y / r).clamp(-1.0, 1.0).acos() <= fov) {
                out.push(format!(
                    "trajectory: anchor leaves the {}-degree field of view at t = {t:.3} s",
                    self.fov_half_angle_deg
                ));
                break;
            }
        }
        out.extend(self.run_config().violations());
        out
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError(v))
        }
    }
}

fn waypoint_pose(points: &[Waypoint], t: f64) -> (Point3, EulerAngles) {
    let i = points.partition_point(|w| w.time <= t);
    if i == 0 {
        return (points[0].position, points[0].attitude);
    }
    if i == points.len() {
        let w = &points[i - 1];
        return (w.position, w.attitude);
    }
    let (a, b) = (&points[i - 1], &points[i]);
    let s = (t - a.time) / (b.time - a.time);
    let lerp = |x: f64, y: f64| wrap_angle(x + s * wrap_angle(y - x));
    (
        a.position.lerp(&b.position, s),
        EulerAngles::new(
            lerp(a.attitude.roll, b.attitude.roll),
            lerp(a.attitude.pitch, b.attitude.pitch),
            lerp(a.attitude.yaw, b.attitude.yaw),
        ),
    )
}

/// Simulates both radars, the IMU and the ground-truth track.
///
/// H chirp `k` uses noise substream `2k` and V chirp `k` substream `2k + 1`,
/// so the log is identical however the frames are scheduled.
pub fn simulate_scenario(scn: &Scenario) -> Result<MeasurementLog, ScenarioError> {
    scn.validate()?;

    let mut timing_rng = ChaCha8Rng::seed_from_u64(scn.seed);
    timing_rng.set_stream(TIMING_STREAM);
    let mut shots = Vec::new();
    for id in [RadarId::H, RadarId::V] {
        let jitter = scn.timing(id).jitter;
        for (k, t) in scn.chirp_times(id).into_iter().enumerate() {
            let dt = if jitter > 0.0 { timing_rng.random_range(-jitter..=jitter) } else { 0.0 };
            let t = (t + dt).clamp(0.0, scn.duration);
            shots.push((id, 2 * k as u64 + id.index() as u64, t));
        }
    }

    let noise = NoiseModel { noise_power: scn.noise_power, seed: scn.seed };
    let mut frames: Vec<BasebandFrame> = shots
        .par_iter()
        .map(|&(id, index, t)| simulate_frame(&scn.pose_at(t), scn.radar(id), &scn.anchor, &noise, t, index))
        .collect();
    frames.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));

    let mount_t = euler_to_rotation(scn.anchor_mount).transpose();
    let imu = sample_times(scn.imu_rate, scn.duration)
        .map(|t| ImuSample {
            timestamp: t + scn.imu_offset,
            attitude: rotation_to_euler(&(mount_t * scn.pose_at(t).attitude)),
        })
        .collect();
    let truth = sample_times(scn.truth_rate, scn.duration).map(|t| scn.pose_at(t)).collect();

    Ok(MeasurementLog {
        header: LogHeader { schema_version: SCHEMA_VERSION, seed: scn.seed, scenario: Some(scn.clone()) },
        frames,
        imu,
        truth,
    })
}
