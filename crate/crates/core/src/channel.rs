//! Forward model of what each radar receives after dechirping.
//!
//! The anchor carries two antenna sets: a horizontally polarized set
//! modulated at `f1_mod` and a vertically polarized set modulated at
//! `f2_mod`. Switch modulation moves the reflection of a target at range
//! `r` to a pair of sidebands at `f_mod +/- 2kr/c`. The set whose
//! polarization matches the radar arrives at full strength; the other set
//! leaks in attenuated by the cross-polarization isolation.
//!
//! The sidebands are modeled as ideal complex tones. The upper sideband of
//! receive channel `n` lags channel 0 by `n * 2 pi d sin(alpha) / lambda`
//! where `alpha` is the anchor azimuth (H radar) or elevation (V radar) in
//! the flight frame. The lower sideband is the mirror image produced by a
//! real mixer, so its propagation and inter-channel phases are conjugated.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::fusion::Pose6DoF;
use crate::geometry::{point_to_spherical, Point3, SphericalFix};

pub const SPEED_OF_LIGHT: f64 = 2.998e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RadarId {
    H,
    V,
}

impl RadarId {
    pub fn index(self) -> usize {
        match self {
            RadarId::H => 0,
            RadarId::V => 1,
        }
    }
}

impl std::fmt::Display for RadarId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RadarId::H => "H",
            RadarId::V => "V",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarization {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AoaAxis {
    Azimuth,
    Elevation,
}

/// Physical-layer parameters of one FMCW radar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub id: RadarId,
    /// Carrier wavelength in meters.
    pub carrier_wavelength: f64,
    /// Chirp slope in Hz/s.
    pub chirp_slope: f64,
    /// Chirp duration in seconds.
    pub chirp_duration: f64,
    /// ADC sample rate in Hz (complex samples).
    pub sample_rate: f64,
    pub samples_per_frame: usize,
    /// Spacing between the two receive antennas in meters.
    pub rx_spacing: f64,
    pub polarization: Polarization,
    pub aoa_axis: AoaAxis,
}

const DEFAULT_WAVELENGTH: f64 = 12.49e-3;

impl Default for RadarConfig {
    fn default() -> Self {
        Self::horizontal()
    }
}

impl RadarConfig {
    /// 24 GHz, 200 MHz/ms chirp, 2048 complex samples at 2 MHz, half-wavelength
    /// receive spacing, horizontally polarized, measuring azimuth.
    pub fn horizontal() -> Self {
        Self {
            id: RadarId::H,
            carrier_wavelength: DEFAULT_WAVELENGTH,
            chirp_slope: 2e11,
            chirp_duration: 1.024e-3,
            sample_rate: 2e6,
            samples_per_frame: 2048,
            rx_spacing: DEFAULT_WAVELENGTH / 2.0,
            polarization: Polarization::Horizontal,
            aoa_axis: AoaAxis::Azimuth,
        }
    }

    /// The vertically polarized twin of [`RadarConfig::horizontal`], measuring
    /// elevation.
    pub fn vertical() -> Self {
        Self {
            id: RadarId::V,
            polarization: Polarization::Vertical,
            aoa_axis: AoaAxis::Elevation,
            ..Self::horizontal()
        }
    }

    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.samples_per_frame as f64
    }

    /// Geometric beat frequency of a reflector at `range` meters.
    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * self.chirp_slope * range / SPEED_OF_LIGHT
    }

    /// Range spanned by one FFT bin of beat frequency.
    pub fn range_per_bin(&self) -> f64 {
        SPEED_OF_LIGHT * self.bin_width() / (2.0 * self.chirp_slope)
    }

    /// Returns one message per violated invariant, each prefixed by `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("carrier_wavelength", self.carrier_wavelength),
            ("chirp_slope", self.chirp_slope),
            ("chirp_duration", self.chirp_duration),
            ("sample_rate", self.sample_rate),
            ("rx_spacing", self.rx_spacing),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{prefix}.{name}: must be finite and > 0 (got {v})"));
            }
        }
        if self.samples_per_frame < 8 {
            out.push(format!("{prefix}.samples_per_frame: must be at least 8"));
        }
        if self.rx_spacing > self.carrier_wavelength / 2.0 * (1.0 + 1e-12) {
            out.push(format!(
                "{prefix}.rx_spacing: {} m exceeds half a wavelength ({} m); angle of arrival would be ambiguous",
                self.rx_spacing,
                self.carrier_wavelength / 2.0
            ));
        }
        if self.sample_rate * self.chirp_duration < self.samples_per_frame as f64 * (1.0 - 1e-12) {
            out.push(format!(
                "{prefix}.samples_per_frame: {} samples do not fit in a {} s chirp at {} Hz",
                self.samples_per_frame, self.chirp_duration, self.sample_rate
            ));
        }
        out
    }
}

/// Range dependence of the reflected amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLoss {
    /// Amplitude independent of range.
    Flat,
    /// Radar-equation power falloff `(r_ref / r)^4`, i.e. amplitude `(r_ref / r)^2`.
    RadarEquation { reference_range: f64 },
}

impl PathLoss {
    pub fn amplitude(&self, range: f64) -> f64 {
        match *self {
            PathLoss::Flat => 1.0,
            PathLoss::RadarEquation { reference_range } => (reference_range / range).powi(2),
        }
    }
}

/// The backscatter anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorConfig {
    /// Anchor origin in the anchor frame.
    pub position: Point3,
    /// Modulation frequency of the horizontally polarized antenna set, Hz.
    pub f1_mod: f64,
    /// Modulation frequency of the vertically polarized antenna set, Hz.
    pub f2_mod: f64,
    /// Power suppression of a polarization mismatch in dB. `inf` removes the
    /// mismatched contribution entirely.
    #[serde(with = "crate::serde_f64_inf")]
    pub cross_pol_isolation: f64,
    /// Linear amplitude of the modulated reflection.
    pub reflection_gain: f64,
    pub path_loss: PathLoss,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            position: Point3::ORIGIN,
            f1_mod: 80e3,
            f2_mod: 100e3,
            cross_pol_isolation: 20.0,
            reflection_gain: 1.0,
            path_loss: PathLoss::Flat,
        }
    }
}

impl AnchorConfig {
    pub fn polarization_of_set(set: usize) -> Polarization {
        if set == 0 {
            Polarization::Horizontal
        } else {
            Polarization::Vertical
        }
    }

    /// Modulation frequency of antenna set 0 (horizontal) or 1 (vertical).
    pub fn modulation(&self, set: usize) -> f64 {
        if set == 0 {
            self.f1_mod
        } else {
            self.f2_mod
        }
    }

    /// Modulation frequency of the antenna set matching `pol`.
    pub fn matched_modulation(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Horizontal => self.f1_mod,
            Polarization::Vertical => self.f2_mod,
        }
    }

    /// Modulation frequency of the antenna set orthogonal to `pol`.
    pub fn mismatched_modulation(&self, pol: Polarization) -> f64 {
        match pol {
            Polarization::Horizontal => self.f2_mod,
            Polarization::Vertical => self.f1_mod,
        }
    }

    /// Linear amplitude factor applied to a polarization-mismatched tone.
    pub fn isolation_amplitude(&self) -> f64 {
        10f64.powf(-self.cross_pol_isolation / 20.0)
    }

    /// `max_beat` is the largest geometric beat frequency expected.
    pub fn violations(&self, prefix: &str, max_beat: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.f1_mod == self.f2_mod {
            out.push(format!("{prefix}.f2_mod: must differ from f1_mod ({} Hz)", self.f1_mod));
        }
        for (name, f) in [("f1_mod", self.f1_mod), ("f2_mod", self.f2_mod)] {
            if !(f.is_finite() && f > 0.0) {
                out.push(format!("{prefix}.{name}: must be finite and > 0 (got {f})"));
            } else if f < 10.0 * max_beat {
                out.push(format!(
                    "{prefix}.{name}: {f} Hz is below 10x the maximum beat frequency ({max_beat:.1} Hz)"
                ));
            }
        }
        if !(self.cross_pol_isolation >= 0.0) {
            out.push(format!(
                "{prefix}.cross_pol_isolation: must be >= 0 dB (got {})",
                self.cross_pol_isolation
            ));
        }
        if !(self.reflection_gain.is_finite() && self.reflection_gain >= 0.0) {
            out.push(format!("{prefix}.reflection_gain: must be finite and >= 0"));
        }
        if let PathLoss::RadarEquation { reference_range } = self.path_loss {
            if !(reference_range.is_finite() && reference_range > 0.0) {
                out.push(format!("{prefix}.path_loss.reference_range: must be > 0"));
            }
        }
        if !self.position.is_finite() {
            out.push(format!("{prefix}.position: must be finite"));
        }
        out
    }
}

/// Additive circular complex Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Per-sample complex variance.
    pub noise_power: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { noise_power: 0.0, seed: 0 }
    }
}

/// Dechirped samples of both receive channels for one chirp.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandFrame {
    pub radar_id: RadarId,
    pub timestamp: f64,
    /// False when the anchor was behind the radar; the frame is then noise only.
    pub anchor_in_view: bool,
    pub rx: [Vec<Complex64>; 2],
}

impl BasebandFrame {
    pub fn len(&self) -> usize {
        self.rx[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.rx[0].is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.rx.iter().flatten().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// One complex exponential present in both receive channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub frequency: f64,
    /// Complex amplitude in channel 0 and channel 1.
    pub amplitude: [Complex64; 2],
}

/// Anchor position in the flight frame of a drone at `pose`.
pub fn anchor_in_flight_frame(pose: &Pose6DoF, anchor: &AnchorConfig) -> Point3 {
    pose.attitude.transpose() * (anchor.position - pose.position)
}

/// Angle the radar measures across its receive pair.
pub fn aoa_angle(radar: &RadarConfig, fix: &SphericalFix) -> f64 {
    match radar.aoa_axis {
        AoaAxis::Azimuth => fix.azimuth,
        AoaAxis::Elevation => fix.elevation,
    }
}

/// Inter-channel phase of the upper sideband for a given arrival angle.
pub fn channel_phase(radar: &RadarConfig, angle: f64) -> f64 {
    2.0 * PI * radar.rx_spacing * angle.sin() / radar.carrier_wavelength
}

/// Noise-free tone set a radar observes. `mod_phases` are the anchor switch
/// phases of the two antenna sets at chirp start.
pub fn anchor_tones(
    fix: &SphericalFix,
    radar: &RadarConfig,
    anchor: &AnchorConfig,
    mod_phases: [f64; 2],
) -> Vec<Tone> {
    let beat = radar.beat_frequency(fix.range);
    let delta = channel_phase(radar, aoa_angle(radar, fix));
    let propagation = 4.0 * PI * fix.range / radar.carrier_wavelength;
    let base = anchor.reflection_gain * anchor.path_loss.amplitude(fix.range);

    let mut tones = Vec::with_capacity(4);
    for set in 0..2 {
        let gain = if AnchorConfig::polarization_of_set(set) == radar.polarization {
            base
        } else {
            base * anchor.isolation_amplitude()
        };
        if gain == 0.0 {
            continue;
        }
        let f_mod = anchor.modulation(set);
        let upper = Complex64::from_polar(gain, mod_phases[set] + propagation);
        let lower = Complex64::from_polar(gain, mod_phases[set] - propagation);
        let lag = Complex64::from_polar(1.0, -delta);
        tones.push(Tone {
            frequency: f_mod + beat,
            amplitude: [upper, upper * lag],
        });
        tones.push(Tone {
            frequency: f_mod - beat,
            amplitude: [lower, lower * lag.conj()],
        });
    }
    tones
}

/// Noise substream for one frame: keyed by the model seed, indexed by frame.
fn frame_rng(noise: &NoiseModel, frame_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(frame_index);
    rng
}

/// Synthesizes one dechirped frame of `radar` with the drone at `drone_pose`
/// at time `t`. `frame_index` selects the noise substream, so frames can be
/// generated in any order.
pub fn simulate_frame(
    drone_pose: &Pose6DoF,
    radar: &RadarConfig,
    anchor: &AnchorConfig,
    noise: &NoiseModel,
    t: f64,
    frame_index: u64,
) -> BasebandFrame {
    let mut rng = frame_rng(noise, frame_index);
    let mod_phases = [rng.random::<f64>() * 2.0 * PI, rng.random::<f64>() * 2.0 * PI];

    let local = anchor_in_flight_frame(drone_pose, anchor);
    let fix = point_to_spherical(local).ok();
    let tones = match &fix {
        Some(fix) => anchor_tones(fix, radar, anchor, mod_phases),
        None => Vec::new(),
    };

    let n = radar.samples_per_frame;
    let dt = 1.0 / radar.sample_rate;
    let mut rx = [vec![Complex64::new(0.0, 0.0); n], vec![Complex64::new(0.0, 0.0); n]];
    for tone in &tones {
        let w = 2.0 * PI * tone.frequency * dt;
        let [ch0, ch1] = &mut rx;
        for (m, (s0, s1)) in ch0.iter_mut().zip(ch1.iter_mut()).enumerate() {
            let osc = Complex64::from_polar(1.0, w * m as f64);
            *s0 += tone.amplitude[0] * osc;
            *s1 += tone.amplitude[1] * osc;
        }
    }

    if noise.noise_power > 0.0 {
        let sigma = (noise.noise_power / 2.0).sqrt();
        for ch in rx.iter_mut() {
            for s in ch.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *s += Complex64::new(re * sigma, im * sigma);
            }
        }
    }

    BasebandFrame {
        radar_id: radar.id,
        timestamp: t,
        anchor_in_view: fix.is_some(),
        rx,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{euler_to_rotation, EulerAngles, Rotation};
    use approx::assert_relative_eq;

    fn pose_at(p: Point3, e: EulerAngles) -> Pose6DoF {
        Pose6DoF { timestamp: 0.0, position: p, attitude: euler_to_rotation(e) }
    }

    /// Least-squares complex amplitudes of known tones, fitted directly in the
    /// time domain. Independent of the FFT path.
    fn fit_known_tones(x: &[Complex64], freqs: &[f64], fs: f64) -> Vec<Complex64> {
        let k = freqs.len();
        let basis: Vec<Vec<Complex64>> = freqs
            .iter()
            .map(|f| (0..x.len()).map(|m| Complex64::from_polar(1.0, 2.0 * PI * f * m as f64 / fs)).collect())
            .collect();
        // Normal equations, solved by Gaussian elimination.
        let mut a = vec![vec![Complex64::new(0.0, 0.0); k + 1]; k];
        for i in 0..k {
            for j in 0..k {
                a[i][j] = basis[i].iter().zip(&basis[j]).map(|(p, q)| p.conj() * q).sum();
            }
            a[i][k] = basis[i].iter().zip(x).map(|(p, q)| p.conj() * q).sum();
        }
        for c in 0..k {
            let piv = a[c][c];
            for j in c..=k {
                a[c][j] /= piv;
            }
            for r in 0..k {
                if r != c {
                    let f = a[r][c];
                    for j in c..=k {
                        let v = a[c][j];
                        a[r][j] -= f * v;
                    }
                }
            }
        }
        (0..k).map(|i| a[i][k]).collect()
    }

    #[test]
    fn defaults_satisfy_radar_invariants() {
        assert!(RadarConfig::horizontal().violations("h").is_empty());
        assert!(RadarConfig::vertical().violations("v").is_empty());
        let mut bad = RadarConfig::horizontal();
        bad.rx_spacing = bad.carrier_wavelength;
        bad.chirp_duration = 1e-3;
        let v = bad.violations("radar_h");
        assert_eq!(v.len(), 2, "{v:?}");
        assert!(v[0].starts_with("radar_h.rx_spacing"));
    }

    #[test]
    fn beat_frequency_at_five_meters() {
        let radar = RadarConfig::vertical();
        // 2 * 2e11 * 5 / 2.998e8
        assert_relative_eq!(radar.beat_frequency(5.0), 6671.114076050701, max_relative = 1e-12);
        // Rounded with c = 3e8 this is the familiar 6666.67 Hz.
        assert_relative_eq!(radar.beat_frequency(5.0), 6666.67, max_relative = 1e-3);
    }

    #[test]
    fn dominant_tone_is_matched_upper_sideband() {
        let radar = RadarConfig::vertical();
        let anchor = AnchorConfig::default();
        let pose = pose_at(Point3::new(0.0, -5.0, 0.0), EulerAngles::default());
        let frame = simulate_frame(&pose, &radar, &anchor, &NoiseModel::default(), 0.0, 0);
        let expect = 100e3 + radar.beat_frequency(5.0);
        let freqs = [expect, 100e3 - radar.beat_frequency(5.0), 80e3 + radar.beat_frequency(5.0), 80e3 - radar.beat_frequency(5.0)];
        for ch in 0..2 {
            let amps = fit_known_tones(&frame.rx[ch], &freqs, radar.sample_rate);
            assert_relative_eq!(amps[0].norm(), 1.0, max_relative = 1e-9);
            assert_relative_eq!(amps[2].norm(), 0.1, max_relative = 1e-9);
        }
    }

    #[test]
    fn boresight_has_zero_channel_phase() {
        let radar = RadarConfig::horizontal();
        let pose = pose_at(Point3::new(0.0, -3.0, 0.0), EulerAngles::default());
        let frame = simulate_frame(&pose, &radar, &AnchorConfig::default(), &NoiseModel::default(), 0.0, 3);
        for (a, b) in frame.rx[0].iter().zip(&frame.rx[1]) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn cross_pol_power_ratio() {
        let radar = RadarConfig::vertical();
        let anchor = AnchorConfig::default();
        let pose = pose_at(Point3::new(0.4, -3.0, 0.2), EulerAngles::default());
        let frame = simulate_frame(&pose, &radar, &anchor, &NoiseModel::default(), 0.0, 11);
        let fix = point_to_spherical(anchor_in_flight_frame(&pose, &anchor)).unwrap();
        let b = radar.beat_frequency(fix.range);
        let amps = fit_known_tones(&frame.rx[0], &[100e3 + b, 100e3 - b, 80e3 + b, 80e3 - b], radar.sample_rate);
        let ratio = amps[0].norm_sqr() / amps[2].norm_sqr();
        assert_relative_eq!(ratio, 100.0, max_relative = 1e-9);
        // Sideband symmetry.
        assert_relative_eq!(amps[0].norm(), amps[1].norm(), max_relative = 1e-9);
        assert_relative_eq!(amps[2].norm(), amps[3].norm(), max_relative = 1e-9);
    }

    #[test]
    fn infinite_isolation_removes_mismatched_set() {
        let anchor = AnchorConfig { cross_pol_isolation: f64::INFINITY, ..Default::default() };
        assert_eq!(anchor.isolation_amplitude(), 0.0);
        let fix = SphericalFix::new(3.0, 0.1, 0.2);
        let tones = anchor_tones(&fix, &RadarConfig::horizontal(), &anchor, [0.0, 0.0]);
        assert_eq!(tones.len(), 2);
        assert!(tones.iter().all(|t| (t.frequency - 80e3).abs() < 20e3));
    }

    #[test]
    fn channel_phase_matches_geometry() {
        let anchor = AnchorConfig::default();
        let pose = pose_at(Point3::new(-1.0, -4.0, 0.6), EulerAngles::from_degrees(2.0, -3.0, 10.0));
        let local = anchor_in_flight_frame(&pose, &anchor);
        let fix = point_to_spherical(local).unwrap();
        for radar in [RadarConfig::horizontal(), RadarConfig::vertical()] {
            let frame = simulate_frame(&pose, &radar, &anchor, &NoiseModel::default(), 0.0, 5);
            let f_mod = anchor.matched_modulation(radar.polarization);
            let other = anchor.mismatched_modulation(radar.polarization);
            let b = radar.beat_frequency(fix.range);
            let freqs = [f_mod + b, f_mod - b, other + b, other - b];
            let a0 = fit_known_tones(&frame.rx[0], &freqs, radar.sample_rate);
            let a1 = fit_known_tones(&frame.rx[1], &freqs, radar.sample_rate);
            let measured = (a0[0] * a1[0].conj()).arg();
            let alpha = match radar.aoa_axis {
                AoaAxis::Azimuth => local.x.atan2(local.y),
                AoaAxis::Elevation => (local.z / local.norm()).asin(),
            };
            let expect = 2.0 * PI * radar.rx_spacing * alpha.sin() / radar.carrier_wavelength;
            assert!((measured - expect).abs() < 1e-6, "{measured} vs {expect}");
        }
    }

    #[test]
    fn behind_radar_is_noise_only() {
        let pose = Pose6DoF { timestamp: 0.0, position: Point3::new(0.0, 2.0, 0.0), attitude: Rotation::IDENTITY };
        let noise = NoiseModel { noise_power: 1.0, seed: 9 };
        let frame = simulate_frame(&pose, &RadarConfig::horizontal(), &AnchorConfig::default(), &noise, 0.0, 0);
        assert!(!frame.anchor_in_view);
        let power: f64 = frame.rx[0].iter().map(|c| c.norm_sqr()).sum::<f64>() / frame.len() as f64;
        assert!((power - 1.0).abs() < 0.1, "{power}");
    }

    #[test]
    fn noise_substreams_are_deterministic_and_distinct() {
        let pose = pose_at(Point3::new(0.0, -2.0, 0.0), EulerAngles::default());
        let noise = NoiseModel { noise_power: 0.5, seed: 42 };
        let radar = RadarConfig::horizontal();
        let anchor = AnchorConfig::default();
        let a = simulate_frame(&pose, &radar, &anchor, &noise, 0.0, 7);
        let b = simulate_frame(&pose, &radar, &anchor, &noise, 0.0, 7);
        let c = simulate_frame(&pose, &radar, &anchor, &noise, 0.0, 8);
        assert_eq!(a, b);
        assert_ne!(a.rx[0], c.rx[0]);
    }

    #[test]
    fn radar_equation_loss() {
        let p = PathLoss::RadarEquation { reference_range: 1.0 };
        assert_relative_eq!(p.amplitude(2.0).powi(2), 1.0 / 16.0);
        assert_eq!(PathLoss::Flat.amplitude(7.0), 1.0);
    }
}
