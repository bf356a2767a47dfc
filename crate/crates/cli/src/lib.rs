//! `mmloc` command-line front end.
//!
//! Exit codes: 0 success, 2 bad input (unparseable or invalid files,
//! schema mismatch, nothing to compare), 3 empty result (no pose survived,
//! calibration found no maneuver), 1 anything else.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod logfile;
pub mod output;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mmloc_core::config::{CalibrationMode, RunConfig};
use mmloc_core::eval::{evaluate, GroundTruthTrack};
use mmloc_core::fusion::{calibrate_offset, detect_frame, run_pipeline};
use mmloc_core::scenario::{simulate_scenario, MeasurementLog, Scenario};
use mmloc_core::sweep::{monte_carlo_sweep, SweepSpec};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::output::{read_poses, write_poses, ReportFile};

pub const CONFIG_ENV: &str = "MMLOC_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "mmloc", version, about = "Single-anchor mmWave backscatter drone localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a flight and write its measurement log.
    Simulate(SimulateArgs),
    /// Run the localization pipeline over a log and write the pose stream.
    Localize(LocalizeArgs),
    /// Compare a pose stream with the ground truth stored in a log.
    Evaluate(EvaluateArgs),
    /// Monte-Carlo sweep of one scenario parameter.
    Sweep(SweepArgs),
    /// Estimate the IMU clock offset of a log and print it.
    Calibrate(CalibrateArgs),
}

/// Processing configuration and the flags that override it.
#[derive(Debug, Clone, Default, Args)]
pub struct ProcessingArgs {
    /// Run configuration (JSON). Fields it sets override values taken from
    /// the log header; fields it omits keep them.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// SNR threshold below which detections are dropped.
    #[arg(long)]
    pub p_thresh: Option<f64>,
    /// Largest allowed range disagreement between receive channels, meters.
    #[arg(long)]
    pub max_range_diff: Option<f64>,
    /// Keep every detection regardless of SNR and range agreement.
    #[arg(long)]
    pub no_filter: bool,
    /// Use this IMU clock offset (seconds) instead of estimating it.
    #[arg(long, allow_negative_numbers = true)]
    pub clock_offset: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario noise power.
    #[arg(long)]
    pub noise_power: Option<f64>,
    /// Store samples in a raw binary section instead of base64.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    /// Measurement log.
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub processing: ProcessingArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Pose file written by `localize`.
    pub poses: PathBuf,
    /// Measurement log holding the ground truth.
    pub log: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run configuration; only `report_bin_width` is used.
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Width of the error-vs-time bins, seconds.
    #[arg(long)]
    pub bin_width: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base scenario file (JSON).
    pub scenario: PathBuf,
    /// Sweep specification: `{"axis": ..., "values": [...], "trials": n}`.
    pub spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub processing: ProcessingArgs,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Measurement log.
    pub log: PathBuf,
    /// Also write the result here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Half-width of the lag search, seconds.
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Empty(String),
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Empty(_) => 3,
            CliError::Other(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Empty(m) => write!(f, "empty result: {m}"),
            CliError::Other(m) => write!(f, "{m}"),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn input<E: std::fmt::Display>(what: &Path) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Input(format!("{}: {e}", what.display()))
}

/// Version accepted in the optional `schema_version` field of input files.
pub const INPUT_SCHEMA_VERSION: u64 = 1;

/// Reads a JSON input file, checking and removing its optional top-level
/// `schema_version`.
fn read_json_value(path: &Path) -> Result<Value> {
    let f = File::open(path).map_err(input(path))?;
    let mut v: Value = serde_json::from_reader(BufReader::new(f)).map_err(input(path))?;
    if let Some(version) = v.as_object_mut().and_then(|o| o.remove("schema_version")) {
        if version.as_u64() != Some(INPUT_SCHEMA_VERSION) {
            return Err(CliError::Input(format!(
                "{}: unsupported schema_version {version} (this build reads {INPUT_SCHEMA_VERSION})",
                path.display()
            )));
        }
    }
    Ok(v)
}

/// Recursively overlays `top` onto `base`; objects merge key by key, any
/// other value replaces.
pub fn merge_json(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Deserializes with the failing field's path in the error message.
fn from_value_with_path<T: DeserializeOwned>(v: Value, what: &Path) -> Result<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        CliError::Input(format!("{}: field `{path}`: {}", what.display(), e.inner()))
    })
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let v = read_json_value(path)?;
    let scn: Scenario = from_value_with_path(v, path)?;
    Ok(scn)
}

fn check_scenario(scn: &Scenario, path: &Path) -> Result<()> {
    let v = scn.violations();
    if v.is_empty() {
        Ok(())
    } else {
        Err(CliError::Input(format!("{}:\n  {}", path.display(), v.join("\n  "))))
    }
}

fn load_log(path: &Path) -> Result<MeasurementLog> {
    let f = File::open(path).map_err(input(path))?;
    logfile::read_log(BufReader::new(f)).map_err(input(path))
}

/// Resolves the run configuration: built-in defaults, then values implied
/// by the log's scenario, then the config file, then command-line flags.
pub fn resolve_run_config(log_scenario: Option<&Scenario>, args: &ProcessingArgs) -> Result<RunConfig> {
    let base = log_scenario.map(Scenario::run_config).unwrap_or_default();
    let mut cfg = match &args.config {
        Some(path) => {
            let mut v = serde_json::to_value(&base).map_err(|e| CliError::Other(e.to_string()))?;
            merge_json(&mut v, read_json_value(path)?);
            from_value_with_path(v, path)?
        }
        None => base,
    };
    if let Some(p) = args.p_thresh {
        cfg.filter.snr_threshold = p;
    }
    if let Some(d) = args.max_range_diff {
        cfg.filter.max_rx_range_diff = d;
    }
    if args.no_filter {
        cfg.filter.enabled = false;
    }
    if let Some(o) = args.clock_offset {
        cfg.calibration.mode = CalibrationMode::Fixed;
        cfg.calibration.offset = o;
    }
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(CliError::Input(format!("run configuration:\n  {}", v.join("\n  "))));
    }
    Ok(cfg)
}

/// Writes `path` through a temporary file in the same directory, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io = |e: std::io::Error| CliError::Other(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        f(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut scn = load_scenario(&args.scenario)?;
    if let Some(s) = args.seed {
        scn.seed = s;
    }
    if let Some(n) = args.noise_power {
        scn.noise_power = n;
    }
    check_scenario(&scn, &args.scenario)?;
    let log = simulate_scenario(&scn).map_err(|e| CliError::Input(e.to_string()))?;
    write_atomic(&args.out, |w| {
        logfile::write_log(&log, w, args.binary).map_err(|e| std::io::Error::other(e.to_string()))
    })?;
    let count = |id| log.frames.iter().filter(|f| f.radar_id == id).count();
    let samples = log.frames.first().map_or(0, |f| f.len());
    println!(
        "frames: H {} V {} ({} samples per channel); imu {}; truth {}",
        count(mmloc_core::channel::RadarId::H),
        count(mmloc_core::channel::RadarId::V),
        samples,
        log.imu.len(),
        log.truth.len()
    );
    Ok(())
}

fn localize(args: &LocalizeArgs) -> Result<()> {
    let log = load_log(&args.log)?;
    let cfg = resolve_run_config(log.header.scenario.as_ref(), &args.processing)?;
    let out = run_pipeline(&log, &cfg);
    write_atomic(&args.out, |w| write_poses(&out, w))?;
    let s = &out.stats;
    println!(
        "poses {} from {} frames; dropped: no detection {}, ambiguous {}, angle domain {}, low snr {}, range mismatch {}, unpaired {}, no attitude {}",
        s.poses,
        s.frames,
        s.no_detection,
        s.ambiguous,
        s.aoa_domain,
        s.filter.low_snr,
        s.filter.range_mismatch,
        s.unpaired,
        s.no_attitude
    );
    match &out.calibration_error {
        Some(e) => println!("clock offset {} s (configured; {e})", out.clock_offset.offset),
        None => println!("clock offset {} s (confidence {:.3})", out.clock_offset.offset, out.clock_offset.confidence),
    }
    if out.poses.is_empty() {
        return Err(CliError::Empty("no fix survived filtering".into()));
    }
    Ok(())
}

fn evaluate_cmd(args: &EvaluateArgs) -> Result<()> {
    let f = File::open(&args.poses).map_err(input(&args.poses))?;
    let poses = read_poses(BufReader::new(f)).map_err(input(&args.poses))?;
    let log = load_log(&args.log)?;
    let bin_width = match (args.bin_width, &args.config) {
        (Some(b), _) => b,
        (None, Some(path)) => {
            let mut v = serde_json::to_value(RunConfig::default()).map_err(|e| CliError::Other(e.to_string()))?;
            merge_json(&mut v, read_json_value(path)?);
            from_value_with_path::<RunConfig>(v, path)?.report_bin_width
        }
        (None, None) => RunConfig::default().report_bin_width,
    };
    if !(bin_width > 0.0) {
        return Err(CliError::Input(format!("bin width must be > 0 (got {bin_width})")));
    }
    let truth = GroundTruthTrack::new(log.truth);
    let mut report = evaluate(&poses.poses, &truth, bin_width);
    if report.evaluated == 0 {
        return Err(CliError::Input("no pose timestamp falls inside the ground-truth span".into()));
    }
    report.drops = poses.stats;
    write_json(&args.out, &ReportFile::new(report.clone()))?;
    if let Some(t) = report.table {
        println!(
            "evaluated {} poses ({} outside truth); 3D error p10 {:.4} m, p50 {:.4} m, p90 {:.4} m",
            report.evaluated, report.excluded, t.l2_m.p10, t.l2_m.p50, t.l2_m.p90
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepSummaryRow {
    #[serde(with = "mmloc_core::serde_f64_inf")]
    value: f64,
    report: String,
    poses: usize,
    yield_fraction: f64,
    l2_p50_m: Option<f64>,
    l2_p90_m: Option<f64>,
    mean_snr: Option<f64>,
    mean_interference_db: Option<f64>,
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    schema_version: u32,
    axis: mmloc_core::sweep::SweepAxis,
    trials: usize,
    base_seed: u64,
    points: &'a [SweepSummaryRow],
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut scn = load_scenario(&args.scenario)?;
    if let Some(s) = args.seed {
        scn.seed = s;
    }
    check_scenario(&scn, &args.scenario)?;
    let spec: SweepSpec = from_value_with_path(read_json_value(&args.spec)?, &args.spec)?;
    if spec.values.is_empty() {
        return Err(CliError::Input(format!("{}: `values` is empty", args.spec.display())));
    }
    if spec.trials == 0 {
        return Err(CliError::Input(format!("{}: `trials` must be at least 1", args.spec.display())));
    }
    let cfg = resolve_run_config(Some(&scn), &args.processing)?;
    let report = monte_carlo_sweep(&scn, &cfg, &spec).map_err(|e| CliError::Input(e.to_string()))?;

    std::fs::create_dir_all(&args.out).map_err(|e| CliError::Other(format!("{}: {e}", args.out.display())))?;
    let mut rows = Vec::with_capacity(report.points.len());
    for (i, p) in report.points.iter().enumerate() {
        let name = format!("{}_{i:03}.json", spec.axis.name());
        write_json(&args.out.join(&name), &ReportFile::new(p.report.clone()))?;
        let l2 = p.report.table.map(|t| t.l2_m);
        rows.push(SweepSummaryRow {
            value: p.value,
            report: name,
            poses: p.stats.poses,
            yield_fraction: p.yield_fraction,
            l2_p50_m: l2.map(|l| l.p50),
            l2_p90_m: l2.map(|l| l.p90),
            mean_snr: p.mean_snr,
            mean_interference_db: p.mean_interference_db,
        });
    }
    let summary = SweepSummary {
        schema_version: output::REPORT_SCHEMA_VERSION,
        axis: spec.axis,
        trials: report.trials,
        base_seed: report.base_seed,
        points: &rows,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    for r in &rows {
        println!(
            "{} = {}: poses {}, median 3D error {}",
            spec.axis.name(),
            r.value,
            r.poses,
            r.l2_p50_m.map_or("n/a".into(), |v| format!("{v:.4} m"))
        );
    }
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let log = load_log(&args.log)?;
    let processing = ProcessingArgs { config: args.config.clone(), ..Default::default() };
    let cfg = resolve_run_config(log.header.scenario.as_ref(), &processing)?;
    let window = args.window.unwrap_or(cfg.calibration.window);
    let h: Vec<_> = log
        .frames
        .iter()
        .filter(|f| f.radar_id == mmloc_core::channel::RadarId::H)
        .filter_map(|f| detect_frame(f, &cfg).ok())
        .collect();
    let offset = calibrate_offset(&log.imu, &h, window).map_err(|e| CliError::Empty(e.to_string()))?;
    let text = serde_json::to_string_pretty(&offset).map_err(|e| CliError::Other(e.to_string()))?;
    println!("{text}");
    if let Some(out) = &args.out {
        write_json(out, &offset)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Localize(a) => localize(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Sweep(a) => sweep(a),
        Command::Calibrate(a) => calibrate(a),
    }
}
