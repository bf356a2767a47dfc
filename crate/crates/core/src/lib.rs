//! Single-anchor FMCW backscatter localization.
//!
//! A drone carries two 24 GHz FMCW radars, one horizontally and one
//! vertically polarized, each with two receive antennas. A static anchor
//! re-radiates their chirps through two antenna sets with orthogonal
//! polarizations, switch-modulated at different frequencies. Each radar
//! measures range and one arrival angle to the anchor; the pair gives a 3D
//! fix in the drone's flight frame, and the IMU attitude turns that into a
//! 6DoF drone pose in the anchor frame.
//!
//! Module map:
//! - [`geometry`]: frames, Euler angles, spherical coordinates.
//! - [`channel`]: radar and anchor configuration and the baseband simulator.
//! - [`spectrum`]: windowed FFT and sideband-pair search.
//! - [`aoa`]: per-radar detections, 3D fixes and outlier rejection.
//! - [`fusion`]: clock calibration, attitude interpolation, pose fusion and
//!   the end-to-end pipeline.
//! - [`scenario`], [`eval`], [`sweep`]: simulated flights, error metrics and
//!   Monte-Carlo sweeps.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod aoa;
pub mod channel;
pub mod config;
pub mod eval;
pub mod fusion;
pub mod geometry;
pub mod scenario;
pub mod spectrum;
pub mod sweep;

pub use num_complex;

/// Serde helpers for `f64` fields that may be positive infinity, written as
/// the string `"inf"`.
pub mod serde_f64_inf {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v == f64::INFINITY {
            Repr::Str("inf".into())
        } else {
            Repr::Num(v)
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => Ok(f64::INFINITY),
            Repr::Str(s) => Err(E::custom(format!("expected a number or \"inf\", got {s:?}"))),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|x| to_repr(*x)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
        }
    }
}
