//! Seeded Monte-Carlo sweeps over one scenario parameter.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::RunConfig;
use crate::eval::{shot_errors, ErrorReport, GroundTruthTrack, ShotError};
use crate::fusion::{run_pipeline, PipelineOutput, PipelineStats};
use crate::scenario::{simulate_scenario, Scenario, ScenarioError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SweepError {
    #[error("sweep needs at least one value")]
    NoValues,
    #[error("sweep needs at least one trial")]
    NoTrials,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{axis} value {value} is invalid")]
    BadValue { axis: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NoisePower,
    CrossPolIsolation,
    PThresh,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::NoisePower => "noise_power",
            SweepAxis::CrossPolIsolation => "cross_pol_isolation",
            SweepAxis::PThresh => "p_thresh",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    #[serde(with = "crate::serde_f64_inf::vec")]
    pub values: Vec<f64>,
    pub trials: usize,
}

/// Results for one sweep value, pooled over all trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    #[serde(with = "crate::serde_f64_inf")]
    pub value: f64,
    pub report: ErrorReport,
    pub stats: PipelineStats,
    /// Poses per shot opportunity (half the frame count).
    pub yield_fraction: f64,
    /// Mean SNR of all detections before filtering.
    pub mean_snr: Option<f64>,
    /// Mean mismatched-band level relative to the matched band, dB, over
    /// detections where the mismatched pair was found.
    pub mean_interference_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub trials: usize,
    pub base_seed: u64,
    pub points: Vec<SweepPoint>,
}

/// Seed of trial `trial`, shared by every sweep value so the values are
/// compared on the same noise realizations.
pub fn trial_seed(base_seed: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

struct TrialResult {
    shots: Vec<ShotError>,
    excluded: usize,
    out: PipelineOutput,
    span: (f64, f64),
}

fn run_trial(scn: &Scenario, cfg: &RunConfig) -> Result<TrialResult, SweepError> {
    let log = simulate_scenario(scn)?;
    let truth = GroundTruthTrack::new(log.truth.clone());
    let out = run_pipeline(&log, cfg);
    let (shots, excluded) = shot_errors(&out.poses, &truth);
    Ok(TrialResult { shots, excluded, out, span: truth.span().unwrap_or((0.0, 0.0)) })
}

fn pool(value: f64, trials: Vec<TrialResult>, bin_width: f64) -> SweepPoint {
    let mut shots = Vec::new();
    let mut excluded = 0;
    let mut stats = PipelineStats::default();
    let mut span = (f64::INFINITY, f64::NEG_INFINITY);
    let mut snrs = Vec::new();
    let mut interference = Vec::new();
    for t in trials {
        shots.extend(t.shots);
        excluded += t.excluded;
        let s = &t.out.stats;
        stats.frames += s.frames;
        stats.no_detection += s.no_detection;
        stats.ambiguous += s.ambiguous;
        stats.aoa_domain += s.aoa_domain;
        stats.detections += s.detections;
        stats.filter.merge(&s.filter);
        stats.unpaired += s.unpaired;
        stats.no_attitude += s.no_attitude;
        stats.poses += s.poses;
        span = (span.0.min(t.span.0), span.1.max(t.span.1));
        snrs.extend(t.out.detections.iter().map(|d| d.snr));
        interference.extend(t.out.detections.iter().filter_map(|d| d.interference_db));
    }
    let mut report = ErrorReport::from_shots(&shots, excluded, span, bin_width);
    report.drops = Some(stats);
    SweepPoint {
        value,
        report,
        stats,
        yield_fraction: if stats.frames > 0 { stats.poses as f64 / (stats.frames as f64 / 2.0) } else { 0.0 },
        mean_snr: mean(snrs.into_iter()),
        mean_interference_db: mean(interference.into_iter()),
    }
}

/// Runs `spec.trials` seeded simulations per value and pools the errors.
/// Trial `i` uses [`trial_seed`]`(base.seed, i)` for every value.
pub fn monte_carlo_sweep(base: &Scenario, cfg: &RunConfig, spec: &SweepSpec) -> Result<SweepReport, SweepError> {
    if spec.values.is_empty() {
        return Err(SweepError::NoValues);
    }
    if spec.trials == 0 {
        return Err(SweepError::NoTrials);
    }
    for &v in &spec.values {
        let ok = match spec.axis {
            SweepAxis::NoisePower | SweepAxis::PThresh => v >= 0.0 && v.is_finite(),
            SweepAxis::CrossPolIsolation => v >= 0.0,
        };
        if !ok {
            return Err(SweepError::BadValue { axis: spec.axis.name(), value: v });
        }
    }

    let scenario_for = |value: f64, trial: usize| {
        let mut scn = base.clone();
        scn.seed = trial_seed(base.seed, trial);
        match spec.axis {
            SweepAxis::NoisePower => scn.noise_power = value,
            SweepAxis::CrossPolIsolation => scn.anchor.cross_pol_isolation = value,
            SweepAxis::PThresh => {}
        }
        scn
    };
    let config_for = |value: f64| {
        let mut c = cfg.clone();
        match spec.axis {
            SweepAxis::PThresh => c.filter.snr_threshold = value,
            SweepAxis::CrossPolIsolation => c.anchor.cross_pol_isolation = value,
            SweepAxis::NoisePower => {}
        }
        c
    };

    let points = spec
        .values
        .par_iter()
        .map(|&value| {
            let c = config_for(value);
            let trials = (0..spec.trials)
                .into_par_iter()
                .map(|i| run_trial(&scenario_for(value, i), &c))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(pool(value, trials, cfg.report_bin_width))
        })
        .collect::<Result<Vec<_>, SweepError>>()?;

    Ok(SweepReport { axis: spec.axis, trials: spec.trials, base_seed: base.seed, points })
}
