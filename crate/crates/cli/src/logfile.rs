//! Measurement log container.
//!
//! A log is newline-delimited JSON. The first line is the header; then come
//! the radar frames, IMU samples and ground-truth poses, each type sorted by
//! timestamp. Complex samples are little-endian `f64` pairs `(re, im)`,
//! either base64-encoded inside each frame record or, with
//! `binary_samples`, appended raw after a closing `binary` record in frame
//! order (channel 0 then channel 1). IMU and truth attitudes are stored in
//! radians so that reading a log back reproduces every value bit for bit.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use mmloc_core::channel::{BasebandFrame, RadarId};
use mmloc_core::fusion::{ImuSample, Pose6DoF};
use mmloc_core::geometry::{EulerAngles, Point3, Rotation};
use mmloc_core::num_complex::Complex64;
use mmloc_core::scenario::{LogHeader, MeasurementLog, Scenario, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LogError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported log schema version {found} (this build reads {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("malformed log: {0}")]
    Format(String),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Record {
    Header(Box<HeaderRecord>),
    Frame(FrameRecord),
    Imu(ImuRecord),
    Truth(TruthRecord),
    Binary { bytes: u64 },
}

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    schema_version: u32,
    seed: u64,
    scenario: Option<Scenario>,
    binary_samples: bool,
    frames: usize,
    imu: usize,
    truth: usize,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    radar: RadarId,
    timestamp: f64,
    anchor_in_view: bool,
    samples_per_channel: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rx: Option<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ImuRecord {
    timestamp: f64,
    attitude_rad: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    timestamp: f64,
    position: [f64; 3],
    rotation: [[f64; 3]; 3],
}

fn samples_to_bytes(samples: &[Complex64], out: &mut Vec<u8>) {
    out.reserve(samples.len() * 16);
    for c in samples {
        out.extend_from_slice(&c.re.to_le_bytes());
        out.extend_from_slice(&c.im.to_le_bytes());
    }
}

fn bytes_to_samples(bytes: &[u8]) -> Vec<Complex64> {
    bytes
        .chunks_exact(16)
        .map(|b| {
            let re = f64::from_le_bytes(b[..8].try_into().unwrap());
            let im = f64::from_le_bytes(b[8..].try_into().unwrap());
            Complex64::new(re, im)
        })
        .collect()
}

fn write_record<W: Write>(w: &mut W, r: &Record) -> Result<(), LogError> {
    serde_json::to_writer(&mut *w, r).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_log<W: Write>(log: &MeasurementLog, mut w: W, binary_samples: bool) -> Result<(), LogError> {
    write_record(
        &mut w,
        &Record::Header(Box::new(HeaderRecord {
            schema_version: SCHEMA_VERSION,
            seed: log.header.seed,
            scenario: log.header.scenario.clone(),
            binary_samples,
            frames: log.frames.len(),
            imu: log.imu.len(),
            truth: log.truth.len(),
        })),
    )?;

    let mut blob = Vec::new();
    for f in &log.frames {
        if f.rx[0].len() != f.rx[1].len() {
            return Err(LogError::Format(format!("frame at {} s has unequal channel lengths", f.timestamp)));
        }
        let rx = if binary_samples {
            samples_to_bytes(&f.rx[0], &mut blob);
            samples_to_bytes(&f.rx[1], &mut blob);
            None
        } else {
            let enc = |ch: &[Complex64]| {
                let mut b = Vec::new();
                samples_to_bytes(ch, &mut b);
                B64.encode(b)
            };
            Some([enc(&f.rx[0]), enc(&f.rx[1])])
        };
        write_record(
            &mut w,
            &Record::Frame(FrameRecord {
                radar: f.radar_id,
                timestamp: f.timestamp,
                anchor_in_view: f.anchor_in_view,
                samples_per_channel: f.rx[0].len(),
                rx,
            }),
        )?;
    }
    for s in &log.imu {
        let a = s.attitude;
        write_record(&mut w, &Record::Imu(ImuRecord { timestamp: s.timestamp, attitude_rad: [a.roll, a.pitch, a.yaw] }))?;
    }
    for p in &log.truth {
        write_record(
            &mut w,
            &Record::Truth(TruthRecord {
                timestamp: p.timestamp,
                position: p.position.to_array(),
                rotation: *p.attitude.matrix(),
            }),
        )?;
    }
    if binary_samples {
        write_record(&mut w, &Record::Binary { bytes: blob.len() as u64 })?;
        w.write_all(&blob)?;
    }
    w.flush()?;
    Ok(())
}

fn sorted_by_time<T>(items: &[T], ts: impl Fn(&T) -> f64, what: &str) -> Result<(), LogError> {
    if items.windows(2).all(|w| ts(&w[0]) <= ts(&w[1])) {
        Ok(())
    } else {
        Err(LogError::Format(format!("{what} records are not sorted by timestamp")))
    }
}

pub fn read_log<R: BufRead>(mut r: R) -> Result<MeasurementLog, LogError> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut next = |r: &mut R, line: &mut String| -> Result<Option<Record>, LogError> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Ok(None);
        }
        lineno += 1;
        serde_json::from_str(line.trim_end())
            .map(Some)
            .map_err(|e| LogError::Parse { line: lineno, msg: e.to_string() })
    };

    let header = match next(&mut r, &mut line)? {
        Some(Record::Header(h)) => h,
        Some(_) => return Err(LogError::Format("first record is not a header".into())),
        None => return Err(LogError::Format("empty file".into())),
    };
    if header.schema_version != SCHEMA_VERSION {
        return Err(LogError::Schema { found: header.schema_version, expected: SCHEMA_VERSION });
    }

    let mut frames = Vec::with_capacity(header.frames);
    let mut lens = Vec::with_capacity(header.frames);
    let mut imu = Vec::with_capacity(header.imu);
    let mut truth = Vec::with_capacity(header.truth);
    let mut blob = None;
    while let Some(rec) = next(&mut r, &mut line)? {
        match rec {
            Record::Header(_) => return Err(LogError::Format("second header record".into())),
            Record::Frame(f) => {
                let rx = match (&f.rx, header.binary_samples) {
                    (Some(rx), false) => {
                        let mut out = [Vec::new(), Vec::new()];
                        for (ch, enc) in rx.iter().enumerate() {
                            let bytes = B64.decode(enc).map_err(|e| LogError::Format(format!("frame sample data: {e}")))?;
                            if bytes.len() != f.samples_per_channel * 16 {
                                return Err(LogError::Format(format!(
                                    "frame at {} s: channel {ch} has {} bytes, expected {}",
                                    f.timestamp,
                                    bytes.len(),
                                    f.samples_per_channel * 16
                                )));
                            }
                            out[ch] = bytes_to_samples(&bytes);
                        }
                        out
                    }
                    (None, true) => [Vec::new(), Vec::new()],
                    _ => return Err(LogError::Format("frame sample encoding disagrees with the header".into())),
                };
                lens.push(f.samples_per_channel);
                frames.push(BasebandFrame { radar_id: f.radar, timestamp: f.timestamp, anchor_in_view: f.anchor_in_view, rx });
            }
            Record::Imu(s) => imu.push(ImuSample {
                timestamp: s.timestamp,
                attitude: EulerAngles::new(s.attitude_rad[0], s.attitude_rad[1], s.attitude_rad[2]),
            }),
            Record::Truth(t) => truth.push(Pose6DoF {
                timestamp: t.timestamp,
                position: Point3::new(t.position[0], t.position[1], t.position[2]),
                attitude: Rotation::from_matrix_unchecked(t.rotation),
            }),
            Record::Binary { bytes } => {
                if !header.binary_samples {
                    return Err(LogError::Format("binary section in a text-only log".into()));
                }
                let mut buf = vec![0u8; bytes as usize];
                r.read_exact(&mut buf)?;
                blob = Some(buf);
                break;
            }
        }
    }

    if header.binary_samples {
        let blob = blob.ok_or_else(|| LogError::Format("missing binary sample section".into()))?;
        let expected: usize = lens.iter().map(|n| n * 32).sum();
        if blob.len() != expected {
            return Err(LogError::Format(format!("binary section has {} bytes, expected {expected}", blob.len())));
        }
        let mut at = 0;
        for (f, n) in frames.iter_mut().zip(&lens) {
            for ch in 0..2 {
                f.rx[ch] = bytes_to_samples(&blob[at..at + n * 16]);
                at += n * 16;
            }
        }
    }

    if (frames.len(), imu.len(), truth.len()) != (header.frames, header.imu, header.truth) {
        return Err(LogError::Format(format!(
            "record counts {}/{}/{} do not match the header ({}/{}/{})",
            frames.len(),
            imu.len(),
            truth.len(),
            header.frames,
            header.imu,
            header.truth
        )));
    }
    sorted_by_time(&frames, |f| f.timestamp, "frame")?;
    sorted_by_time(&imu, |s| s.timestamp, "imu")?;
    sorted_by_time(&truth, |p| p.timestamp, "truth")?;

    Ok(MeasurementLog {
        header: LogHeader { schema_version: header.schema_version, seed: header.seed, scenario: header.scenario },
        frames,
        imu,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny_log(samples: Vec<(f64, f64)>) -> MeasurementLog {
        let rx: Vec<Complex64> = samples.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let rev: Vec<Complex64> = rx.iter().rev().copied().collect();
        MeasurementLog {
            header: LogHeader { schema_version: SCHEMA_VERSION, seed: 9, scenario: Some(Scenario::default()) },
            frames: vec![BasebandFrame { radar_id: RadarId::V, timestamp: 0.1, anchor_in_view: true, rx: [rx, rev] }],
            imu: vec![ImuSample { timestamp: 0.3, attitude: EulerAngles::new(0.1, -0.2, 3.0) }],
            truth: vec![Pose6DoF::new(0.0, Point3::new(1.0 / 3.0, -2.0, 0.7), EulerAngles::new(0.3, 0.2, 0.1))],
        }
    }

    fn round_trip(log: &MeasurementLog, binary: bool) -> MeasurementLog {
        let mut buf = Vec::new();
        write_log(log, &mut buf, binary).unwrap();
        read_log(&buf[..]).unwrap()
    }

    proptest! {
        #[test]
        fn samples_round_trip_bit_exact(
            s in prop::collection::vec((any::<f64>().prop_filter("finite", |x| x.is_finite()), -1e300..1e300f64), 0..64),
            binary in any::<bool>(),
        ) {
            let log = tiny_log(s);
            let back = round_trip(&log, binary);
            prop_assert_eq!(&back, &log);
            for (a, b) in back.frames[0].rx[0].iter().zip(&log.frames[0].rx[0]) {
                prop_assert_eq!(a.re.to_bits(), b.re.to_bits());
                prop_assert_eq!(a.im.to_bits(), b.im.to_bits());
            }
        }
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let mut buf = Vec::new();
        write_log(&tiny_log(vec![(1.0, 2.0)]), &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen("\"schema_version\":1", "\"schema_version\":99", 1);
        assert!(matches!(read_log(text.as_bytes()), Err(LogError::Schema { found: 99, .. })));
    }

    #[test]
    fn truncated_binary_section_is_rejected() {
        let mut buf = Vec::new();
        write_log(&tiny_log(vec![(1.0, 2.0), (3.0, 4.0)]), &mut buf, true).unwrap();
        buf.truncate(buf.len() - 8);
        assert!(read_log(&buf[..]).is_err());
    }

    #[test]
    fn header_only_is_an_empty_log() {
        let log = MeasurementLog::default();
        assert_eq!(round_trip(&log, false), log);
    }
}
