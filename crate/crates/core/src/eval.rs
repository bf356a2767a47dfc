//! Error metrics against ground truth: per-axis and 3D percentiles,
//! error-vs-time series and the 3D error CDF.

use serde::{Deserialize, Serialize};

use crate::fusion::{PipelineStats, Pose6DoF};
use crate::geometry::{wrap_angle, EulerAngles, Point3};

/// Nearest-rank percentile of an ascending slice: the smallest value with at
/// least `p` percent of the samples at or below it.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

fn sorted(v: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Absolute angle difference folded into [0, 180] degrees.
pub fn angle_error_deg(estimate: f64, truth: f64) -> f64 {
    wrap_angle(estimate - truth).abs().to_degrees()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthTrack {
    pub samples: Vec<Pose6DoF>,
    eulers: Vec<EulerAngles>,
}

impl GroundTruthTrack {
    /// `samples` must have strictly increasing timestamps.
    pub fn new(samples: Vec<Pose6DoF>) -> Self {
        let eulers = samples.iter().map(Pose6DoF::euler).collect();
        Self { samples, eulers }
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.first()?.timestamp, self.samples.last()?.timestamp))
    }

    /// Position and attitude at `t`, or `None` outside the track.
    pub fn interpolate(&self, t: f64) -> Option<(Point3, EulerAngles)> {
        let (start, end) = self.span()?;
        if !(t >= start && t <= end) {
            return None;
        }
        let i = self.samples.partition_point(|s| s.timestamp < t);
        if self.samples[i].timestamp == t {
            return Some((self.samples[i].position, self.eulers[i]));
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let (ea, eb) = (self.eulers[i - 1], self.eulers[i]);
        let s = (t - a.timestamp) / (b.timestamp - a.timestamp);
        let lerp = |x: f64, y: f64| wrap_angle(x + s * wrap_angle(y - x));
        Some((
            a.position.lerp(&b.position, s),
            EulerAngles::new(lerp(ea.roll, eb.roll), lerp(ea.pitch, eb.pitch), lerp(ea.yaw, eb.yaw)),
        ))
    }
}

/// Errors of one pose against interpolated truth. Positions in meters,
/// angles in degrees, all absolute.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotError {
    pub timestamp: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub l2: f64,
}

/// Per-pose errors for every pose inside the truth span, plus the number
/// of poses outside it.
pub fn shot_errors(poses: &[Pose6DoF], truth: &GroundTruthTrack) -> (Vec<ShotError>, usize) {
    let mut out = Vec::with_capacity(poses.len());
    let mut excluded = 0;
    for pose in poses {
        let Some((p, e)) = truth.interpolate(pose.timestamp) else {
            excluded += 1;
            continue;
        };
        let d = pose.position - p;
        let est = pose.euler();
        out.push(ShotError {
            timestamp: pose.timestamp,
            x: d.x.abs(),
            y: d.y.abs(),
            z: d.z.abs(),
            roll: angle_error_deg(est.roll, e.roll),
            pitch: angle_error_deg(est.pitch, e.pitch),
            yaw: angle_error_deg(est.yaw, e.yaw),
            l2: d.norm(),
        });
    }
    (out, excluded)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl Percentiles {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let s = sorted(values);
        Some(Self { p10: percentile(&s, 10.0)?, p50: percentile(&s, 50.0)?, p90: percentile(&s, 90.0)? })
    }
}

/// Percentile rows in the layout of the usual localization error table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub x_m: Percentiles,
    pub y_m: Percentiles,
    pub z_m: Percentiles,
    pub roll_deg: Percentiles,
    pub pitch_deg: Percentiles,
    pub yaw_deg: Percentiles,
    pub l2_m: Percentiles,
}

impl ErrorTable {
    pub fn of(shots: &[ShotError]) -> Option<Self> {
        let col = |f: fn(&ShotError) -> f64| Percentiles::of(shots.iter().map(f));
        Some(Self {
            x_m: col(|s| s.x)?,
            y_m: col(|s| s.y)?,
            z_m: col(|s| s.z)?,
            roll_deg: col(|s| s.roll)?,
            pitch_deg: col(|s| s.pitch)?,
            yaw_deg: col(|s| s.yaw)?,
            l2_m: col(|s| s.l2)?,
        })
    }
}

/// 3D error statistics of the poses in `[start, end)`. `None` values mark a
/// bin with no poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBin {
    pub start: f64,
    pub end: f64,
    pub count: usize,
    pub p10: Option<f64>,
    pub median: Option<f64>,
    pub p90: Option<f64>,
}

/// Bins 3D errors by elapsed time since `origin`. The final bin is closed
/// so a pose at exactly `end` lands in it.
pub fn bin_errors(shots: &[ShotError], origin: f64, end: f64, bin_width: f64) -> Vec<TimeBin> {
    assert!(bin_width > 0.0, "bin width must be positive");
    let n = (((end - origin) / bin_width - 1e-9).ceil() as usize).max(1);
    let mut buckets = vec![Vec::new(); n];
    for s in shots {
        let b = ((s.timestamp - origin) / bin_width).floor();
        if b >= 0.0 {
            buckets[(b as usize).min(n - 1)].push(s.l2);
        }
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let s = sorted(v);
            TimeBin {
                start: origin + i as f64 * bin_width,
                end: origin + (i + 1) as f64 * bin_width,
                count: s.len(),
                p10: percentile(&s, 10.0),
                median: percentile(&s, 50.0),
                p90: percentile(&s, 90.0),
            }
        })
        .collect()
}

/// Median, 10th and 90th percentile of the 3D error per time bin, with bins
/// anchored at the start of the truth track.
pub fn error_vs_time(poses: &[Pose6DoF], truth: &GroundTruthTrack, bin_width: f64) -> Vec<TimeBin> {
    let Some((start, end)) = truth.span() else {
        return Vec::new();
    };
    let (shots, _) = shot_errors(poses, truth);
    bin_errors(&shots, start, end, bin_width)
}

/// Empirical CDF of `values` as (value, cumulative fraction) pairs.
pub fn cdf(values: impl IntoIterator<Item = f64>) -> Vec<(f64, f64)> {
    let s = sorted(values);
    let n = s.len() as f64;
    s.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// Poses compared against truth.
    pub evaluated: usize,
    /// Poses outside the truth span.
    pub excluded: usize,
    /// `None` when nothing was evaluated.
    pub table: Option<ErrorTable>,
    pub time_bins: Vec<TimeBin>,
    /// CDF of the 3D error, meters.
    pub cdf: Vec<(f64, f64)>,
    pub drops: Option<PipelineStats>,
}

impl ErrorReport {
    pub fn from_shots(shots: &[ShotError], excluded: usize, span: (f64, f64), bin_width: f64) -> Self {
        Self {
            evaluated: shots.len(),
            excluded,
            table: ErrorTable::of(shots),
            time_bins: bin_errors(shots, span.0, span.1, bin_width),
            cdf: cdf(shots.iter().map(|s| s.l2)),
            drops: None,
        }
    }

    pub fn median_l2(&self) -> Option<f64> {
        self.table.map(|t| t.l2_m.p50)
    }
}

/// Compares `poses` with `truth`. Poses outside the truth span are counted
/// as excluded.
pub fn evaluate(poses: &[Pose6DoF], truth: &GroundTruthTrack, bin_width: f64) -> ErrorReport {
    let (shots, excluded) = shot_errors(poses, truth);
    let span = truth.span().unwrap_or((0.0, 0.0));
    ErrorReport::from_shots(&shots, excluded, span, bin_width)
}
