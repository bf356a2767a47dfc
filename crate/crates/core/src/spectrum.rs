//! Per-frame spectral processing: windowed FFT, sideband-pair search, sub-bin
//! refinement and the in-band SNR used for outlier rejection.
//!
//! A modulated anchor shows up as two peaks at `f_mod - f_beat` and
//! `f_mod + f_beat`. Their midpoint estimates the anchor modulation frequency
//! and their half separation the geometric beat, which maps to range.
//!
//! Peak positions are first refined by 3-point parabolic interpolation on the
//! log power, then polished by a least-squares fit of two Hann-windowed tones
//! to the complex bins around the pair. The fit removes the mutual leakage of
//! the two sidebands, which otherwise dominates the error at short range
//! where they are only a few bins apart (or merged into one lobe).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::Range;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{BasebandFrame, RadarConfig, RadarId, SPEED_OF_LIGHT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("no sideband pair above the noise floor")]
    NoDetection,
    #[error("peaks found but none form a pair centered on the modulation frequency")]
    AmbiguousDetection,
    #[error("invalid search configuration: {0}")]
    Config(String),
}

/// Spectrum of one receive channel, ordered by increasing frequency
/// (negative frequencies first).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bin_frequencies: Vec<f64>,
    pub magnitudes_sq: Vec<f64>,
    pub complex_bins: Vec<Complex64>,
    pub bin_width: f64,
    /// Power removed from the zeroed DC bin.
    pub dc_power: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.complex_bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.complex_bins.is_empty()
    }

    /// Signed FFT bin number of index `i`.
    pub fn signed_bin(&self, i: usize) -> f64 {
        i as f64 - (self.len() / 2) as f64
    }

    /// Index of the bin whose center is nearest to `f`, clamped to the axis.
    pub fn nearest_index(&self, f: f64) -> usize {
        let i = (f / self.bin_width).round() + (self.len() / 2) as f64;
        i.clamp(0.0, (self.len() - 1) as f64) as usize
    }

    /// Indices of the bins whose center lies inside `[f_low, f_high]`.
    pub fn index_range(&self, f_low: f64, f_high: f64) -> Range<usize> {
        let half = (self.len() / 2) as f64;
        let lo = ((f_low / self.bin_width).ceil() + half).max(0.0) as usize;
        let hi = ((f_high / self.bin_width).floor() + half + 1.0).clamp(0.0, self.len() as f64) as usize;
        lo.min(hi)..hi
    }

    pub fn total_power(&self) -> f64 {
        self.magnitudes_sq.iter().sum::<f64>() + self.dc_power
    }
}

/// Spectra of both receive channels of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpectrum {
    pub radar_id: RadarId,
    pub timestamp: f64,
    pub channels: [Spectrum; 2],
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Periodic Hann window `0.5 - 0.5 cos(2 pi n / N)`.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn channel_spectrum(samples: &[Complex64], window: &[f64], bin_width: f64) -> Spectrum {
    let n = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().zip(window).map(|(s, w)| s * w).collect();
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);

    // fftshift so frequencies increase with index.
    let half = n / 2;
    buf.rotate_left(n - half);
    let dc_power = buf[half].norm_sqr();
    buf[half] = Complex64::new(0.0, 0.0);

    let bin_frequencies = (0..n).map(|i| (i as f64 - half as f64) * bin_width).collect();
    let magnitudes_sq = buf.iter().map(|c| c.norm_sqr()).collect();
    Spectrum {
        bin_frequencies,
        magnitudes_sq,
        complex_bins: buf,
        bin_width,
        dc_power,
    }
}

/// Hann-windowed FFT of both channels with the DC bin zeroed.
pub fn compute_spectrum(frame: &BasebandFrame, radar: &RadarConfig) -> FrameSpectrum {
    let n = frame.len();
    let window = hann_window(n);
    let bin_width = radar.sample_rate / n as f64;
    FrameSpectrum {
        radar_id: frame.radar_id,
        timestamp: frame.timestamp,
        channels: [
            channel_spectrum(&frame.rx[0], &window, bin_width),
            channel_spectrum(&frame.rx[1], &window, bin_width),
        ],
    }
}

/// `sum_{m<N} exp(j 2 pi nu m / N)`.
fn dirichlet(nu: f64, n: usize) -> Complex64 {
    let nf = n as f64;
    let den = (PI * nu / nf).sin();
    let mag = if den.abs() < 1e-12 {
        // nu is (numerically) a multiple of N; only nu ~ 0 occurs here.
        nf
    } else {
        (PI * nu).sin() / den
    };
    Complex64::from_polar(1.0, PI * nu * (nf - 1.0) / nf) * mag
}

/// DFT at bin `k` of a unit complex tone at fractional bin position `k + nu`
/// after the periodic Hann window.
pub fn hann_kernel(nu: f64, n: usize) -> Complex64 {
    dirichlet(nu, n) * 0.5 - (dirichlet(nu + 1.0, n) + dirichlet(nu - 1.0, n)) * 0.25
}

/// Least-squares fit of complex tone amplitudes to the bins `range` of `spec`.
///
/// Returns the amplitudes (in time-domain units) and the projected energy.
/// Near-coincident frequencies make the problem singular; the fit then
/// falls back to the first tone alone.
pub fn fit_tones(spec: &Spectrum, range: Range<usize>, freqs: &[f64]) -> (Vec<Complex64>, f64) {
    let n = spec.len();
    let cols: Vec<Vec<Complex64>> = freqs
        .iter()
        .map(|f| {
            let u = f / spec.bin_width;
            range.clone().map(|i| hann_kernel(u - spec.signed_bin(i), n)).collect()
        })
        .collect();
    let data = &spec.complex_bins[range];
    solve_projection(&cols, data).unwrap_or_else(|| {
        let (a, e) = solve_projection(&cols[..1], data).unwrap_or((vec![Complex64::new(0.0, 0.0)], 0.0));
        let mut amps = vec![Complex64::new(0.0, 0.0); freqs.len()];
        amps[0] = a[0];
        (amps, e)
    })
}

fn solve_projection(cols: &[Vec<Complex64>], data: &[Complex64]) -> Option<(Vec<Complex64>, f64)> {
    let k = cols.len();
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 { a.iter().zip(b).map(|(p, q)| p.conj() * q).sum() };
    let mut m = vec![vec![Complex64::new(0.0, 0.0); k + 1]; k];
    let mut rhs = Vec::with_capacity(k);
    for i in 0..k {
        for j in 0..k {
            m[i][j] = dot(&cols[i], &cols[j]);
        }
        let b = dot(&cols[i], data);
        m[i][k] = b;
        rhs.push(b);
    }
    let scale = (0..k).map(|i| m[i][i].re).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    for c in 0..k {
        let piv = (c..k).max_by(|&a, &b| m[a][c].norm().total_cmp(&m[b][c].norm()))?;
        if m[piv][c].norm() < 1e-9 * scale {
            return None;
        }
        m.swap(c, piv);
        let p = m[c][c];
        for v in m[c][c..].iter_mut() {
            *v /= p;
        }
        for r in 0..k {
            if r != c {
                let f = m[r][c];
                if f != Complex64::new(0.0, 0.0) {
                    for j in c..=k {
                        let v = m[c][j];
                        m[r][j] -= f * v;
                    }
                }
            }
        }
    }
    let amps: Vec<Complex64> = (0..k).map(|i| m[i][k]).collect();
    let energy = rhs.iter().zip(&amps).map(|(b, a)| (b.conj() * a).re).sum();
    Some((amps, energy))
}

/// Frequency window of the sideband-pair search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBand {
    pub f_low: f64,
    pub f_high: f64,
    /// Bins excluded around each peak when summing in-band noise.
    pub guard_bins: usize,
    /// Allowed distance, in bins, between the pair midpoint and the nominal
    /// modulation frequency.
    pub symmetry_bins: f64,
    /// A local maximum is a peak candidate only above this multiple of the
    /// median in-band power.
    pub floor_ratio: f64,
}

pub const DEFAULT_GUARD_BINS: usize = 3;
pub const DEFAULT_SYMMETRY_BINS: f64 = 2.0;
pub const DEFAULT_FLOOR_RATIO: f64 = 10.0;

impl SearchBand {
    pub fn new(f_low: f64, f_high: f64) -> Self {
        Self {
            f_low,
            f_high,
            guard_bins: DEFAULT_GUARD_BINS,
            symmetry_bins: DEFAULT_SYMMETRY_BINS,
            floor_ratio: DEFAULT_FLOOR_RATIO,
        }
    }

    /// Band centered on `f_mod` wide enough for reflectors out to `max_range`,
    /// plus the guard region around the outermost peaks.
    pub fn for_anchor(radar: &RadarConfig, f_mod: f64, max_range: f64) -> Self {
        let margin = DEFAULT_GUARD_BINS as f64 * radar.bin_width();
        let half = radar.beat_frequency(max_range) + margin;
        Self::new(f_mod - half, f_mod + half)
    }

    pub fn overlaps(&self, o: &SearchBand) -> bool {
        self.f_low <= o.f_high && o.f_low <= self.f_high
    }

    pub fn validate(&self) -> Result<(), SpectrumError> {
        if !(self.f_low < self.f_high) {
            return Err(SpectrumError::Config(format!(
                "band lower edge {} Hz is not below upper edge {} Hz",
                self.f_low, self.f_high
            )));
        }
        if self.guard_bins < 1 {
            return Err(SpectrumError::Config("guard_bins must be at least 1".into()));
        }
        Ok(())
    }
}

/// A detected sideband pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakPair {
    pub f_lower: f64,
    pub f_upper: f64,
    /// Midpoint of the pair: the estimated anchor modulation frequency.
    pub f_anchor_est: f64,
    /// Half separation of the pair: the geometric beat frequency.
    pub f_beat: f64,
    /// Bin power at the upper sideband.
    pub peak_power: f64,
    /// Upper-sideband power over the summed in-band power outside the guard gaps.
    pub snr: f64,
    /// Spectrum index nearest to `f_upper`.
    pub upper_bin: usize,
    /// Fitted complex amplitude of the upper sideband with the lower
    /// sideband's leakage removed.
    pub upper_amplitude: Complex64,
}

/// Parabolic vertex offset in bins from three log-power samples.
fn parabolic_offset(p: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= p.len() || p[i - 1] <= 0.0 || p[i + 1] <= 0.0 || p[i] <= 0.0 {
        return 0.0;
    }
    let (a, b, c) = (p[i - 1].ln(), p[i].ln(), p[i + 1].ln());
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / den).clamp(-0.5, 0.5)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len() / 2]
}

/// Minimizes `f` over the plane with the Nelder-Mead simplex method.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, x0: [f64; 2], step: f64, tol: f64, max_iter: usize) -> [f64; 2] {
    let mut pts = [x0, [x0[0] + step, x0[1]], [x0[0], x0[1] + step]];
    let mut vals = pts.map(&f);
    let lerp = |a: [f64; 2], b: [f64; 2], t: f64| [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
    for _ in 0..max_iter {
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        let size = (pts[1][0] - pts[0][0]).abs().max((pts[1][1] - pts[0][1]).abs())
            .max((pts[2][0] - pts[0][0]).abs())
            .max((pts[2][1] - pts[0][1]).abs());
        if size < tol {
            break;
        }
        let centroid = lerp(pts[0], pts[1], 0.5);
        let reflected = lerp(centroid, pts[2], -1.0);
        let fr = f(reflected);
        if fr < vals[0] {
            let expanded = lerp(centroid, pts[2], -2.0);
            let fe = f(expanded);
            if fe < fr {
                pts[2] = expanded;
                vals[2] = fe;
            } else {
                pts[2] = reflected;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            pts[2] = reflected;
            vals[2] = fr;
        } else {
            let contracted = if fr < vals[2] {
                lerp(centroid, reflected, 0.5)
            } else {
                lerp(centroid, pts[2], 0.5)
            };
            let fc = f(contracted);
            if fc < vals[2].min(fr) {
                pts[2] = contracted;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    pts[i] = lerp(pts[0], pts[i], 0.5);
                    vals[i] = f(pts[i]);
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    pts[best]
}

/// Initial pair hypothesis, in fractional bins relative to the spectrum axis.
enum Hypothesis {
    Pair(usize, usize),
    Merged(usize),
}

/// Finds the anchor's sideband pair inside `band`.
pub fn find_peak_pair(spec: &Spectrum, band: &SearchBand, f_mod_nominal: f64) -> Result<PeakPair, SpectrumError> {
    band.validate()?;
    let range = spec.index_range(band.f_low, band.f_high);
    if range.len() < 3 {
        return Err(SpectrumError::Config(format!(
            "band [{}, {}] Hz covers fewer than 3 bins",
            band.f_low, band.f_high
        )));
    }
    let p = &spec.magnitudes_sq;
    let bw = spec.bin_width;

    let mut in_band: Vec<f64> = p[range.clone()].to_vec();
    let floor = median(&mut in_band);
    let max_power = in_band.last().copied().unwrap_or(0.0);
    if max_power <= 0.0 {
        return Err(SpectrumError::NoDetection);
    }
    let threshold = band.floor_ratio * floor;

    let candidates: Vec<usize> = range
        .clone()
        .filter(|&i| {
            let left = if i > 0 { p[i - 1] } else { f64::NEG_INFINITY };
            let right = if i + 1 < p.len() { p[i + 1] } else { f64::NEG_INFINITY };
            p[i] > left && p[i] >= right && p[i] > threshold
        })
        .collect();
    if candidates.is_empty() {
        return Err(SpectrumError::NoDetection);
    }

    let tol = band.symmetry_bins * bw;
    let freq = |i: usize| spec.bin_frequencies[i];
    let mut best: Option<(f64, Hypothesis)> = None;
    for (a, &i) in candidates.iter().enumerate() {
        if (freq(i) - f_mod_nominal).abs() <= tol {
            let score = p[i];
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, Hypothesis::Merged(i)));
            }
        }
        for &j in &candidates[a + 1..] {
            let mid = 0.5 * (freq(i) + freq(j));
            if (mid - f_mod_nominal).abs() <= tol {
                let score = p[i] + p[j];
                if best.as_ref().is_none_or(|(s, _)| score > *s) {
                    best = Some((score, Hypothesis::Pair(i, j)));
                }
            }
        }
    }
    let Some((_, hyp)) = best else {
        return Err(SpectrumError::AmbiguousDetection);
    };

    // Everything below works in fractional signed bins.
    let to_bins = |i: usize, off: f64| spec.signed_bin(i) + off;
    let (center0, half0, span) = match hyp {
        Hypothesis::Pair(i, j) => {
            let lo = to_bins(i, parabolic_offset(p, i));
            let hi = to_bins(j, parabolic_offset(p, j));
            (0.5 * (lo + hi), 0.5 * (hi - lo), (i, j))
        }
        Hypothesis::Merged(i) => (to_bins(i, parabolic_offset(p, i)), 0.0, (i, i)),
    };

    let pad = band.guard_bins + 3;
    let fit_range = span.0.saturating_sub(pad).max(range.start)..(span.1 + pad + 1).min(range.end);
    let energy = |c: f64, h: f64| -> f64 {
        let h = h.abs();
        fit_tones(spec, fit_range.clone(), &[(c + h) * bw, (c - h) * bw]).1
    };

    let half_init = match hyp {
        Hypothesis::Pair(..) => half0,
        Hypothesis::Merged(_) => {
            // The lobe hides the separation; scan it.
            (0..=60)
                .map(|s| s as f64 * 0.05)
                .max_by(|a, b| energy(center0, *a).total_cmp(&energy(center0, *b)))
                .unwrap_or(0.0)
        }
    };

    let e0 = energy(center0, half_init).max(f64::MIN_POSITIVE);
    let polished = nelder_mead(|x| -energy(x[0], x[1]) / e0, [center0, half_init], 0.05, 1e-9, 400);
    let (center, half) = if (polished[0] - center0).abs() <= 1.5 && (polished[1].abs() - half_init).abs() <= 1.5 {
        (polished[0], polished[1].abs())
    } else {
        (center0, half_init)
    };

    let f_upper = (center + half) * bw;
    let f_lower = (center - half) * bw;
    let (amps, _) = fit_tones(spec, fit_range, &[f_upper, f_lower]);

    let upper_bin = spec.nearest_index(f_upper);
    let lower_bin = spec.nearest_index(f_lower);
    let guard = band.guard_bins;
    let residual: f64 = range
        .clone()
        .filter(|&i| i.abs_diff(upper_bin) > guard && i.abs_diff(lower_bin) > guard)
        .map(|i| p[i])
        .sum();
    let peak_power = p[upper_bin];

    Ok(PeakPair {
        f_lower,
        f_upper,
        f_anchor_est: 0.5 * (f_lower + f_upper),
        f_beat: 0.5 * (f_upper - f_lower),
        peak_power,
        snr: peak_power / residual.max(f64::MIN_POSITIVE),
        upper_bin,
        upper_amplitude: amps[0],
    })
}

/// Range of a reflector with geometric beat `f_beat` under chirp slope `k`.
pub fn range_from_beat(f_beat: f64, k: f64) -> f64 {
    SPEED_OF_LIGHT * f_beat / (2.0 * k)
}

/// Searches the two anchor bands independently.
///
/// `bands[i]` is searched around `f_mods[i]`; the caller decides which of
/// the two results belongs to its own polarization.
pub fn separate_dual_frequency(
    spec: &Spectrum,
    bands: [&SearchBand; 2],
    f_mods: [f64; 2],
) -> Result<[Result<PeakPair, SpectrumError>; 2], SpectrumError> {
    if bands[0].overlaps(bands[1]) {
        return Err(SpectrumError::Config(format!(
            "search bands [{}, {}] Hz and [{}, {}] Hz overlap",
            bands[0].f_low, bands[0].f_high, bands[1].f_low, bands[1].f_high
        )));
    }
    Ok([
        find_peak_pair(spec, bands[0], f_mods[0]),
        find_peak_pair(spec, bands[1], f_mods[1]),
    ])
}
