//! RF-IMU fusion: IMU clock calibration, attitude interpolation, and the
//! transform from an anchor fix in the flight frame to a drone pose in the
//! anchor frame. Also hosts the end-to-end pipeline over a measurement log.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aoa::{combine, detect, filter_outliers, pair_detections, AoaError, FilterStats, Fix3D, RadarDetection};
use crate::channel::RadarId;
use crate::config::{CalibrationMode, RunConfig};
use crate::geometry::{euler_to_rotation, rotation_to_euler, wrap_angle, EulerAngles, Point3, Rotation};
use crate::scenario::MeasurementLog;
use crate::spectrum::{compute_spectrum, separate_dual_frequency, SpectrumError};

/// Yaw-rate variance below which no rotation maneuver is assumed, rad^2/s^2.
const YAW_RATE_VARIANCE_FLOOR: f64 = 1e-8;
/// Correlation below which calibration is rejected.
const MIN_CONFIDENCE: f64 = 0.5;
/// Fewest rate pairs a lag needs before its correlation counts.
const MIN_RATE_PAIRS: usize = 8;
/// Shortest time over which an azimuth difference is taken as a rate.
/// Differencing consecutive chirps would amplify the per-shot angle noise.
const RATE_BASELINE: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("time {t} s is outside the IMU span [{start}, {end}] s")]
    Extrapolation { t: f64, start: f64, end: f64 },
    #[error("calibration failed: peak correlation {confidence:.3} (no usable rotation maneuver)")]
    CalibrationFailed { confidence: f64 },
    #[error("IMU and radar streams overlap {overlap:.3} s, need at least {needed:.3} s")]
    InsufficientOverlap { overlap: f64, needed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// IMU clock, seconds.
    pub timestamp: f64,
    /// Attitude of the flight frame in the drone world frame.
    pub attitude: EulerAngles,
}

/// Drone pose in the anchor frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose6DoF {
    pub timestamp: f64,
    pub position: Point3,
    /// Rotation from the flight frame to the anchor frame.
    pub attitude: Rotation,
}

impl Pose6DoF {
    pub fn new(timestamp: f64, position: Point3, attitude: EulerAngles) -> Self {
        Self { timestamp, position, attitude: euler_to_rotation(attitude) }
    }

    pub fn euler(&self) -> EulerAngles {
        rotation_to_euler(&self.attitude)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClockOffset {
    /// IMU clock minus radar clock, seconds.
    pub offset: f64,
    /// Peak normalized correlation.
    pub confidence: f64,
    pub grid_step: f64,
}

fn median_spacing(ts: impl Iterator<Item = f64>) -> Option<f64> {
    let ts: Vec<f64> = ts.collect();
    let mut d: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    if d.is_empty() {
        return None;
    }
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

/// Yaw unwrapped into a continuous series.
fn unwrapped_yaw(imu: &[ImuSample]) -> Vec<f64> {
    let mut out = Vec::with_capacity(imu.len());
    let mut acc = 0.0;
    for (i, s) in imu.iter().enumerate() {
        if i == 0 {
            acc = s.attitude.yaw;
        } else {
            acc += wrap_angle(s.attitude.yaw - imu[i - 1].attitude.yaw);
        }
        out.push(acc);
    }
    out
}

fn interp_series(ts: &[f64], ys: &[f64], t: f64) -> Option<f64> {
    if ts.is_empty() || t < ts[0] || t > ts[ts.len() - 1] {
        return None;
    }
    let i = ts.partition_point(|&x| x <= t);
    if i == ts.len() {
        return Some(ys[ts.len() - 1]);
    }
    let (t0, t1) = (ts[i - 1], ts[i]);
    let s = (t - t0) / (t1 - t0);
    Some(ys[i - 1] + s * (ys[i] - ys[i - 1]))
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Estimates the IMU clock offset by correlating the azimuth rate seen by
/// the H radar with the IMU yaw rate over a grid of lags in
/// `[-window, window]`. A positive yaw turns the anchor to the right of the
/// boresight, so the two rates correlate positively at the true lag.
pub fn calibrate_offset(
    imu: &[ImuSample],
    detections: &[RadarDetection],
    window: f64,
) -> Result<ClockOffset, FusionError> {
    let h: Vec<&RadarDetection> = detections.iter().filter(|d| d.radar_id == RadarId::H).collect();
    let (imu_start, imu_end) = match (imu.first(), imu.last()) {
        (Some(a), Some(b)) => (a.timestamp, b.timestamp),
        _ => return Err(FusionError::InsufficientOverlap { overlap: 0.0, needed: 2.0 * window }),
    };
    let (det_start, det_end) = match (h.first(), h.last()) {
        (Some(a), Some(b)) => (a.timestamp, b.timestamp),
        _ => return Err(FusionError::InsufficientOverlap { overlap: 0.0, needed: 2.0 * window }),
    };
    let overlap = imu_end.min(det_end) - imu_start.max(det_start);
    if overlap < 2.0 * window {
        return Err(FusionError::InsufficientOverlap { overlap: overlap.max(0.0), needed: 2.0 * window });
    }

    let its: Vec<f64> = imu.iter().map(|s| s.timestamp).collect();
    let yaw = unwrapped_yaw(imu);
    let yaw_rates: Vec<f64> = its
        .windows(2)
        .zip(yaw.windows(2))
        .map(|(t, y)| (y[1] - y[0]) / (t[1] - t[0]))
        .collect();
    let n = yaw_rates.len().max(1) as f64;
    let mean = yaw_rates.iter().sum::<f64>() / n;
    let var = yaw_rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    if !(var > YAW_RATE_VARIANCE_FLOOR) {
        return Err(FusionError::CalibrationFailed { confidence: 0.0 });
    }

    let imu_period = median_spacing(its.iter().copied()).unwrap_or(f64::INFINITY);
    let radar_period = median_spacing(h.iter().map(|d| d.timestamp)).unwrap_or(f64::INFINITY);
    let grid_step = imu_period.min(radar_period) / 4.0;
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(FusionError::CalibrationFailed { confidence: 0.0 });
    }

    // Each detection is paired with the first one at least a baseline later;
    // pairs spanning a gap in the detections are skipped.
    let baseline = RATE_BASELINE.max(radar_period);
    let rate_pairs: Vec<(f64, f64, f64)> = h
        .iter()
        .enumerate()
        .filter_map(|(i, a)| {
            let b = h[i + 1..].iter().find(|b| b.timestamp - a.timestamp >= baseline - 1e-9)?;
            let dt = b.timestamp - a.timestamp;
            (dt <= 2.0 * baseline).then(|| (a.timestamp, b.timestamp, wrap_angle(b.angle - a.angle) / dt))
        })
        .collect();

    let steps = (window / grid_step + 1e-9).floor() as i64;
    let scores: Vec<(f64, f64)> = (-steps..=steps)
        .into_par_iter()
        .map(|k| {
            let lag = k as f64 * grid_step;
            let mut az = Vec::with_capacity(rate_pairs.len());
            let mut yr = Vec::with_capacity(rate_pairs.len());
            for &(t0, t1, rate) in &rate_pairs {
                if let (Some(y0), Some(y1)) = (interp_series(&its, &yaw, t0 + lag), interp_series(&its, &yaw, t1 + lag)) {
                    az.push(rate);
                    yr.push((y1 - y0) / (t1 - t0));
                }
            }
            let score = if az.len() >= MIN_RATE_PAIRS { pearson(&az, &yr) } else { f64::NEG_INFINITY };
            (lag, score)
        })
        .collect();

    let (offset, confidence) = scores
        .into_iter()
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    if !(confidence >= MIN_CONFIDENCE) {
        return Err(FusionError::CalibrationFailed { confidence: confidence.max(-1.0) });
    }
    Ok(ClockOffset { offset, confidence, grid_step })
}

/// Attitude at IMU time `t`, interpolated per angle along the shorter arc.
pub fn interpolate_attitude(imu: &[ImuSample], t: f64) -> Result<EulerAngles, FusionError> {
    let (first, last) = match (imu.first(), imu.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(FusionError::Extrapolation { t, start: f64::NAN, end: f64::NAN }),
    };
    if !(t >= first.timestamp && t <= last.timestamp) {
        return Err(FusionError::Extrapolation { t, start: first.timestamp, end: last.timestamp });
    }
    let i = imu.partition_point(|s| s.timestamp < t);
    if imu[i].timestamp == t {
        return Ok(imu[i].attitude);
    }
    let (a, b) = (&imu[i - 1], &imu[i]);
    let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
    let lerp = |x: f64, y: f64| wrap_angle(x + s * wrap_angle(y - x));
    Ok(EulerAngles::new(
        lerp(a.attitude.roll, b.attitude.roll),
        lerp(a.attitude.pitch, b.attitude.pitch),
        lerp(a.attitude.yaw, b.attitude.yaw),
    ))
}

/// Drone pose from an anchor fix in the flight frame and the IMU attitude,
/// for an anchor at the origin with its frame aligned to the drone world frame.
pub fn fuse(fix: &Fix3D, attitude: EulerAngles) -> Pose6DoF {
    fuse_mounted(fix, attitude, &Rotation::IDENTITY, Point3::ORIGIN)
}

/// Like [`fuse`] for an anchor at `anchor_position` whose frame is rotated
/// by `mount` (drone world frame to anchor frame).
pub fn fuse_mounted(fix: &Fix3D, attitude: EulerAngles, mount: &Rotation, anchor_position: Point3) -> Pose6DoF {
    let r_df_dw = euler_to_rotation(attitude);
    let p_anch_dw = r_df_dw * fix.point;
    Pose6DoF {
        timestamp: fix.timestamp,
        position: anchor_position - *mount * p_anch_dw,
        attitude: *mount * r_df_dw,
    }
}

/// Per-stage counts of shots that did not make it to a pose.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub frames: usize,
    pub no_detection: usize,
    pub ambiguous: usize,
    pub aoa_domain: usize,
    pub detections: usize,
    pub filter: FilterStats,
    pub unpaired: usize,
    pub no_attitude: usize,
    pub poses: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineOutput {
    pub poses: Vec<Pose6DoF>,
    /// The fix each pose was computed from.
    pub fixes: Vec<Fix3D>,
    /// Every detection before filtering, in timestamp order.
    pub detections: Vec<RadarDetection>,
    pub stats: PipelineStats,
    /// Offset applied to map radar time to IMU time.
    pub clock_offset: ClockOffset,
    /// Why automatic calibration fell back to the configured offset.
    pub calibration_error: Option<String>,
}

/// Why a frame produced no detection.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShotFailure {
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Aoa(#[from] AoaError),
}

/// Matched-band detection of one frame, with the mismatched band's level
/// recorded as interference.
pub fn detect_frame(frame: &crate::channel::BasebandFrame, cfg: &RunConfig) -> Result<RadarDetection, ShotFailure> {
    let radar = cfg.radar(frame.radar_id);
    let spectrum = compute_spectrum(frame, radar);
    let bands = cfg.bands(radar);
    let f_mods = [cfg.anchor.f1_mod, cfg.anchor.f2_mod];
    let matched = RunConfig::matched_band(radar);

    let mut pairs = Vec::with_capacity(2);
    let mut interference_db = None;
    for (ch, spec) in spectrum.channels.iter().enumerate() {
        let mut found = separate_dual_frequency(spec, [&bands[0], &bands[1]], f_mods).map_err(ShotFailure::Spectrum)?;
        let own = std::mem::replace(&mut found[matched], Err(SpectrumError::NoDetection)).map_err(ShotFailure::Spectrum)?;
        if ch == 0 {
            if let Ok(other) = &found[1 - matched] {
                interference_db = Some(20.0 * (other.upper_amplitude.norm() / own.upper_amplitude.norm()).log10());
            }
        }
        pairs.push(own);
    }
    let pairs: [_; 2] = pairs.try_into().map_err(|_| ShotFailure::Spectrum(SpectrumError::NoDetection))?;
    let mut det = detect(&pairs, &spectrum, &bands[matched], radar).map_err(ShotFailure::Aoa)?;
    det.interference_db = interference_db;
    Ok(det)
}

/// Runs the whole chain over a log: spectra, peak pairs, detections,
/// calibration, filtering, pairing, fixes and fusion. Single-shot failures
/// are counted, never fatal.
pub fn run_pipeline(log: &MeasurementLog, cfg: &RunConfig) -> PipelineOutput {
    let mut stats = PipelineStats { frames: log.frames.len(), ..Default::default() };

    let outcomes: Vec<Result<RadarDetection, ShotFailure>> =
        log.frames.par_iter().map(|f| detect_frame(f, cfg)).collect();
    let mut detections = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        match o {
            Ok(d) => detections.push(d),
            Err(ShotFailure::Spectrum(SpectrumError::AmbiguousDetection)) => stats.ambiguous += 1,
            Err(ShotFailure::Spectrum(_)) => stats.no_detection += 1,
            Err(ShotFailure::Aoa(_)) => stats.aoa_domain += 1,
        }
    }
    detections.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    stats.detections = detections.len();

    let fixed = ClockOffset { offset: cfg.calibration.offset, confidence: 0.0, grid_step: 0.0 };
    let (clock_offset, calibration_error) = match cfg.calibration.mode {
        CalibrationMode::Fixed => (fixed, None),
        CalibrationMode::Auto => match calibrate_offset(&log.imu, &detections, cfg.calibration.window) {
            Ok(c) => (c, None),
            Err(e) => (fixed, Some(e.to_string())),
        },
    };

    let (kept, filter_stats) = filter_outliers(detections.iter().cloned(), &cfg.filter);
    stats.filter = filter_stats;
    let (h, v): (Vec<RadarDetection>, Vec<RadarDetection>) = kept.into_iter().partition(|d| d.radar_id == RadarId::H);
    let pairs = pair_detections(&h, &v, cfg.filter.max_pairing_gap);
    stats.unpaired = h.len() + v.len() - 2 * pairs.len();

    let mount = cfg.anchor_mount_rotation();
    let mut poses = Vec::with_capacity(pairs.len());
    let mut fixes = Vec::with_capacity(pairs.len());
    for (i, j) in pairs {
        let Ok(fix) = combine(&h[i], &v[j], cfg.filter.max_pairing_gap) else {
            stats.unpaired += 2;
            continue;
        };
        match interpolate_attitude(&log.imu, fix.timestamp + clock_offset.offset) {
            Ok(att) => {
                poses.push(fuse_mounted(&fix, att, &mount, cfg.anchor.position));
                fixes.push(fix);
            }
            Err(_) => stats.no_attitude += 1,
        }
    }
    stats.poses = poses.len();

    PipelineOutput { poses, fixes, detections, stats, clock_offset, calibration_error }
}
