//! Processing configuration shared by the pipeline, the sweep harness and the CLI.

use serde::{Deserialize, Serialize};

use crate::aoa::FilterConfig;
use crate::channel::{AnchorConfig, Polarization, RadarConfig, RadarId};
use crate::geometry::{euler_to_rotation, EulerAngles, Rotation};
use crate::spectrum::{SearchBand, DEFAULT_FLOOR_RATIO, DEFAULT_GUARD_BINS, DEFAULT_SYMMETRY_BINS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    /// Estimate the IMU clock offset from the log; fall back to the fixed
    /// offset if no rotation maneuver is found.
    Auto,
    /// Use the configured offset as is.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub mode: CalibrationMode,
    /// Half-width of the lag search, seconds.
    pub window: f64,
    /// IMU clock minus radar clock, seconds.
    pub offset: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { mode: CalibrationMode::Auto, window: 1.0, offset: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub radar_h: RadarConfig,
    pub radar_v: RadarConfig,
    pub anchor: AnchorConfig,
    /// Longest range the search bands must cover, meters.
    pub max_range: f64,
    pub guard_bins: usize,
    pub symmetry_bins: f64,
    pub floor_ratio: f64,
    pub filter: FilterConfig,
    pub calibration: CalibrationConfig,
    /// Rotation of the drone world frame relative to the anchor frame.
    pub anchor_mount: EulerAngles,
    /// Width of the error-vs-time bins in reports, seconds.
    pub report_bin_width: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            radar_h: RadarConfig::horizontal(),
            radar_v: RadarConfig::vertical(),
            anchor: AnchorConfig::default(),
            max_range: 5.0,
            guard_bins: DEFAULT_GUARD_BINS,
            symmetry_bins: DEFAULT_SYMMETRY_BINS,
            floor_ratio: DEFAULT_FLOOR_RATIO,
            filter: FilterConfig::default(),
            calibration: CalibrationConfig::default(),
            anchor_mount: EulerAngles::default(),
            report_bin_width: 1.0,
        }
    }
}

impl RunConfig {
    pub fn radar(&self, id: RadarId) -> &RadarConfig {
        match id {
            RadarId::H => &self.radar_h,
            RadarId::V => &self.radar_v,
        }
    }

    pub fn anchor_mount_rotation(&self) -> Rotation {
        euler_to_rotation(self.anchor_mount)
    }

    /// Search bands of `radar` around the horizontal-set and vertical-set
    /// modulation frequencies, in that order.
    pub fn bands(&self, radar: &RadarConfig) -> [SearchBand; 2] {
        [self.anchor.f1_mod, self.anchor.f2_mod].map(|f| {
            let mut band = SearchBand::for_anchor(radar, f, self.max_range);
            let extra = self.guard_bins.saturating_sub(DEFAULT_GUARD_BINS) as f64 * radar.bin_width();
            band.f_low -= extra;
            band.f_high += extra;
            band.guard_bins = self.guard_bins;
            band.symmetry_bins = self.symmetry_bins;
            band.floor_ratio = self.floor_ratio;
            band
        })
    }

    /// Index into [`RunConfig::bands`] of the band matching `radar`.
    pub fn matched_band(radar: &RadarConfig) -> usize {
        match radar.polarization {
            Polarization::Horizontal => 0,
            Polarization::Vertical => 1,
        }
    }

    /// Every violated cross-field constraint, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut out = self.radar_h.violations("radar_h");
        out.extend(self.radar_v.violations("radar_v"));
        if self.radar_h.id != RadarId::H {
            out.push("radar_h.id: must be H".into());
        }
        if self.radar_v.id != RadarId::V {
            out.push("radar_v.id: must be V".into());
        }
        if self.radar_h.polarization == self.radar_v.polarization {
            out.push("radar_v.polarization: the two radars must be orthogonally polarized".into());
        }
        if !(self.max_range > 0.0) {
            out.push(format!("max_range: must be > 0 (got {})", self.max_range));
        }
        let max_beat = self
            .radar_h
            .beat_frequency(self.max_range)
            .max(self.radar_v.beat_frequency(self.max_range));
        out.extend(self.anchor.violations("anchor", max_beat));
        if self.guard_bins < 1 {
            out.push("guard_bins: must be at least 1".into());
        }
        if !(self.symmetry_bins > 0.0) {
            out.push("symmetry_bins: must be > 0".into());
        }
        if !(self.floor_ratio >= 0.0) {
            out.push("floor_ratio: must be >= 0".into());
        }
        for (name, radar) in [("radar_h", &self.radar_h), ("radar_v", &self.radar_v)] {
            let [a, b] = self.bands(radar);
            if a.overlaps(&b) {
                out.push(format!(
                    "anchor.f2_mod: search bands of {name} overlap ([{:.0}, {:.0}] Hz vs [{:.0}, {:.0}] Hz); \
                     separate the modulation frequencies or reduce max_range",
                    a.f_low, a.f_high, b.f_low, b.f_high
                ));
            }
            let nyquist = 0.5 * radar.sample_rate;
            if a.f_high.max(b.f_high) >= nyquist || a.f_low.min(b.f_low) <= 0.0 {
                out.push(format!("{name}.sample_rate: search bands must lie inside (0, {nyquist}) Hz"));
            }
        }
        out.extend(self.filter.violations("filter"));
        if !(self.calibration.window > 0.0) {
            out.push("calibration.window: must be > 0".into());
        }
        if !self.calibration.offset.is_finite() {
            out.push("calibration.offset: must be finite".into());
        }
        if !self.anchor_mount.is_finite() {
            out.push("anchor_mount: must be finite".into());
        }
        if !(self.report_bin_width > 0.0) {
            out.push("report_bin_width: must be > 0".into());
        }
        out
    }

    /// Configuration for anchors out to `max_range`, with the modulation
    /// frequencies raised so both bands and the 10x beat margin fit.
    pub fn wide_range(max_range: f64) -> Self {
        let mut cfg = Self { max_range, ..Self::default() };
        let beat = cfg.radar_h.beat_frequency(max_range);
        let f1 = (10.0 * beat / 10e3).ceil() * 10e3;
        cfg.anchor.f1_mod = f1.max(80e3);
        cfg.anchor.f2_mod = cfg.anchor.f1_mod + (2.0 * beat / 10e3).ceil() * 10e3 + 20e3;
        cfg
    }
}
