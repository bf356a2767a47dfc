//! Single-shot localization: angle of arrival per radar, pairing of the H
//! and V detections into one 3D fix, and SNR/range-consistency outlier
//! rejection.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{RadarConfig, RadarId};
use crate::geometry::{spherical_to_point, wrap_angle, Point3, SphericalFix};
use crate::spectrum::{fit_tones, range_from_beat, FrameSpectrum, PeakPair, SearchBand};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AoaError {
    #[error("phase {delta_phi} rad is impossible for spacing {spacing} m: the arcsine argument exceeds 1")]
    Domain { delta_phi: f64, spacing: f64 },
    #[error("detections {h} s and {v} s are more than {max_gap} s apart")]
    Pairing { h: f64, v: f64, max_gap: f64 },
    #[error("expected one H and one V detection")]
    WrongRadars,
}

/// One radar's single-shot measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarDetection {
    pub radar_id: RadarId,
    pub timestamp: f64,
    /// Range estimated on each receive channel.
    pub channel_ranges: [f64; 2],
    /// Mean of the channel ranges.
    pub range: f64,
    /// Azimuth for the H radar, elevation for the V radar.
    pub angle: f64,
    pub snr: f64,
    pub delta_phi: f64,
    /// Mismatched-polarization band power relative to the matched band, dB.
    /// `None` when nothing was found in the mismatched band.
    pub interference_db: Option<f64>,
}

impl RadarDetection {
    pub fn range_mismatch(&self) -> f64 {
        (self.channel_ranges[0] - self.channel_ranges[1]).abs()
    }
}

/// An anchor position in the drone flight frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fix3D {
    pub timestamp: f64,
    pub point: Point3,
    pub spherical: SphericalFix,
    /// Smaller of the two detections' SNR.
    pub quality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// Detections with SNR strictly below this are dropped.
    pub snr_threshold: f64,
    /// Largest allowed difference between the two receive-channel ranges, m.
    pub max_rx_range_diff: f64,
    /// Largest allowed time between paired H and V detections, s.
    pub max_pairing_gap: f64,
    /// When false, every detection passes.
    pub enabled: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            snr_threshold: 4.0,
            max_rx_range_diff: 0.5,
            // 1.5 chirp periods at 20 chirps/s.
            max_pairing_gap: 0.075,
            enabled: true,
        }
    }
}

impl FilterConfig {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [
            ("snr_threshold", self.snr_threshold),
            ("max_rx_range_diff", self.max_rx_range_diff),
            ("max_pairing_gap", self.max_pairing_gap),
        ] {
            if !(v > 0.0) {
                out.push(format!("{prefix}.{name}: must be > 0 (got {v})"));
            }
        }
        out
    }
}

/// `asin(delta_phi * lambda / (2 pi d))` with `delta_phi` wrapped to (-pi, pi].
pub fn angle_from_phase(delta_phi: f64, spacing: f64, wavelength: f64) -> Result<f64, AoaError> {
    let wrapped = wrap_angle(delta_phi);
    let s = wrapped * wavelength / (2.0 * PI * spacing);
    if !(s.abs() <= 1.0 + 1e-12) {
        return Err(AoaError::Domain { delta_phi: wrapped, spacing });
    }
    Ok(s.clamp(-1.0, 1.0).asin())
}

/// Builds a detection from the matched-band pairs of both receive channels.
///
/// The phase difference is taken on the upper sideband. Both channels are
/// fitted at the same (channel-averaged) sideband frequencies so that the
/// ratio of the two upper-sideband amplitudes carries only the inter-channel
/// phase, free of leakage from the lower sideband.
pub fn detect(
    pairs: &[PeakPair; 2],
    spectrum: &FrameSpectrum,
    band: &SearchBand,
    radar: &RadarConfig,
) -> Result<RadarDetection, AoaError> {
    let channel_ranges = [
        range_from_beat(pairs[0].f_beat, radar.chirp_slope),
        range_from_beat(pairs[1].f_beat, radar.chirp_slope),
    ];
    let f_upper = 0.5 * (pairs[0].f_upper + pairs[1].f_upper);
    let f_lower = 0.5 * (pairs[0].f_lower + pairs[1].f_lower);

    let ch0 = &spectrum.channels[0];
    let band_bins = ch0.index_range(band.f_low, band.f_high);
    let pad = band.guard_bins + 3;
    let lo = ch0.nearest_index(f_lower).saturating_sub(pad).max(band_bins.start);
    let hi = (ch0.nearest_index(f_upper) + pad + 1).min(band_bins.end);
    let range = lo..hi.max(lo + 1);

    let amp = |ch: usize| -> Complex64 {
        fit_tones(&spectrum.channels[ch], range.clone(), &[f_upper, f_lower]).0[0]
    };
    let delta_phi = (amp(0) * amp(1).conj()).arg();
    let angle = angle_from_phase(delta_phi, radar.rx_spacing, radar.carrier_wavelength)?;

    Ok(RadarDetection {
        radar_id: radar.id,
        timestamp: spectrum.timestamp,
        channel_ranges,
        range: 0.5 * (channel_ranges[0] + channel_ranges[1]),
        angle,
        snr: pairs[0].snr.min(pairs[1].snr),
        delta_phi,
        interference_db: None,
    })
}

/// Merges an H (azimuth) and a V (elevation) detection into one 3D fix.
pub fn combine(h: &RadarDetection, v: &RadarDetection, max_pairing_gap: f64) -> Result<Fix3D, AoaError> {
    if h.radar_id != RadarId::H || v.radar_id != RadarId::V {
        return Err(AoaError::WrongRadars);
    }
    if (h.timestamp - v.timestamp).abs() > max_pairing_gap {
        return Err(AoaError::Pairing { h: h.timestamp, v: v.timestamp, max_gap: max_pairing_gap });
    }
    let spherical = SphericalFix::new(0.5 * (h.range + v.range), h.angle, v.angle);
    Ok(Fix3D {
        timestamp: 0.5 * (h.timestamp + v.timestamp),
        point: spherical_to_point(spherical),
        spherical,
        quality: h.snr.min(v.snr),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    LowSnr,
    RangeMismatch,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub kept: usize,
    pub low_snr: usize,
    pub range_mismatch: usize,
}

impl FilterStats {
    pub fn record(&mut self, reason: Option<DropReason>) {
        match reason {
            None => self.kept += 1,
            Some(DropReason::LowSnr) => self.low_snr += 1,
            Some(DropReason::RangeMismatch) => self.range_mismatch += 1,
        }
    }

    pub fn merge(&mut self, o: &FilterStats) {
        self.kept += o.kept;
        self.low_snr += o.low_snr;
        self.range_mismatch += o.range_mismatch;
    }
}

/// Why `d` would be dropped under `cfg`, if at all.
pub fn drop_reason(d: &RadarDetection, cfg: &FilterConfig) -> Option<DropReason> {
    if !cfg.enabled {
        None
    } else if d.snr < cfg.snr_threshold {
        Some(DropReason::LowSnr)
    } else if d.range_mismatch() > cfg.max_rx_range_diff {
        Some(DropReason::RangeMismatch)
    } else {
        None
    }
}

/// Drops low-SNR detections and those whose receive channels disagree on
/// range. Order is preserved.
pub fn filter_outliers<I>(detections: I, cfg: &FilterConfig) -> (Vec<RadarDetection>, FilterStats)
where
    I: IntoIterator<Item = RadarDetection>,
{
    let mut stats = FilterStats::default();
    let kept = detections
        .into_iter()
        .filter(|d| {
            let reason = drop_reason(d, cfg);
            stats.record(reason);
            reason.is_none()
        })
        .collect();
    (kept, stats)
}

fn nearest(times: &[f64], t: f64) -> Option<usize> {
    let i = times.partition_point(|&x| x < t);
    let mut best = None;
    for j in [i.wrapping_sub(1), i] {
        if j < times.len() && best.is_none_or(|b: usize| (times[j] - t).abs() < (times[b] - t).abs()) {
            best = Some(j);
        }
    }
    best
}

/// Pairs H and V detections that are each other's nearest neighbour in time
/// and no more than `max_gap` apart. Both inputs must be sorted by time.
pub fn pair_detections(h: &[RadarDetection], v: &[RadarDetection], max_gap: f64) -> Vec<(usize, usize)> {
    let ht: Vec<f64> = h.iter().map(|d| d.timestamp).collect();
    let vt: Vec<f64> = v.iter().map(|d| d.timestamp).collect();
    (0..h.len())
        .filter_map(|i| {
            let j = nearest(&vt, ht[i])?;
            let back = nearest(&ht, vt[j])?;
            (back == i && (ht[i] - vt[j]).abs() <= max_gap).then_some((i, j))
        })
        .collect()
}
