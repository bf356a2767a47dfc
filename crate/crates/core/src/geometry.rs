//! Frames, rotations and the spherical/Cartesian conversion used throughout.
//!
//! Axis convention for every frame: x to the right, y forward (radar
//! boresight at zero attitude), z up. Euler angles compose as
//! `R = Rz(yaw) * Rx(pitch) * Ry(roll)`: with y forward, pitch tilts about
//! x and roll about y. Angles are radians everywhere in the library; the
//! serialized form of [`EulerAngles`] is degrees.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point has zero length")]
    ZeroLength,
    #[error("point is outside the forward field of view (y = {0})")]
    BehindRadar(f64),
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    // rem_euclid can land exactly on -pi after the subtraction.
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Roll, pitch and yaw in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(into = "EulerDegrees", from = "EulerDegrees")]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct EulerDegrees {
    roll_deg: f64,
    pitch_deg: f64,
    yaw_deg: f64,
}

/// Degrees that convert back to exactly `rad`, preferring the shortest
/// decimal form among the few ulps around the plain conversion. Angles read
/// from degrees therefore print as they were written.
pub fn invertible_degrees(rad: f64) -> f64 {
    let d = rad.to_degrees();
    if !d.is_finite() {
        return d;
    }
    let (mut up, mut down) = (d, d);
    let mut best: Option<(usize, f64)> = None;
    for _ in 0..=16 {
        for c in [down, up] {
            if c.to_radians() == rad {
                let len = c.to_string().len();
                if best.is_none_or(|(l, _)| len < l) {
                    best = Some((len, c));
                }
            }
        }
        up = up.next_up();
        down = down.next_down();
    }
    best.map_or(d, |(_, c)| c)
}

impl From<EulerAngles> for EulerDegrees {
    fn from(e: EulerAngles) -> Self {
        Self {
            roll_deg: invertible_degrees(e.roll),
            pitch_deg: invertible_degrees(e.pitch),
            yaw_deg: invertible_degrees(e.yaw),
        }
    }
}

impl From<EulerDegrees> for EulerAngles {
    fn from(d: EulerDegrees) -> Self {
        Self::from_degrees(d.roll_deg, d.pitch_deg, d.yaw_deg)
    }
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_degrees(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self::new(roll.to_radians(), pitch.to_radians(), yaw.to_radians())
    }

    pub fn to_degrees(self) -> [f64; 3] {
        [self.roll.to_degrees(), self.pitch.to_degrees(), self.yaw.to_degrees()]
    }

    pub fn is_finite(&self) -> bool {
        self.roll.is_finite() && self.pitch.is_finite() && self.yaw.is_finite()
    }

    /// Canonical form: yaw and roll in (-pi, pi], pitch in [-pi/2, pi/2].
    /// Goes through the rotation matrix so that out-of-range pitch is folded
    /// correctly.
    pub fn normalized(self) -> Self {
        rotation_to_euler(&euler_to_rotation(self))
    }
}

/// A point or free vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn distance(&self, o: &Point3) -> f64 {
        (*self - *o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn lerp(&self, o: &Point3, s: f64) -> Point3 {
        *self + (*o - *self) * s
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// A proper rotation stored row-major: `m[row][col]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Wraps a matrix without checking orthonormality.
    pub const fn from_matrix_unchecked(m: [[f64; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn rot_x(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self::from_matrix_unchecked([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    }

    pub fn rot_y(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self::from_matrix_unchecked([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    }

    pub fn rot_z(a: f64) -> Self {
        let (s, c) = a.sin_cos();
        Self::from_matrix_unchecked([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.m;
        Self::from_matrix_unchecked([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    /// Inverse of a rotation is its transpose.
    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest elementwise deviation of `R^T R` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let p = self.transpose() * *self;
        let mut worst: f64 = 0.0;
        for (i, row) in p.m.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - expect).abs());
            }
        }
        worst
    }

    /// Largest elementwise difference between two matrices.
    pub fn max_abs_diff(&self, o: &Rotation) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        worst
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        let m = &self.m;
        Point3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, o: Rotation) -> Rotation {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.m[i][k] * o.m[k][j]).sum();
            }
        }
        Rotation::from_matrix_unchecked(out)
    }
}

impl Mul<Point3> for Rotation {
    type Output = Point3;
    fn mul(self, p: Point3) -> Point3 {
        self.apply(&p)
    }
}

/// `R = Rz(yaw) * Rx(pitch) * Ry(roll)`.
pub fn euler_to_rotation(e: EulerAngles) -> Rotation {
    let (sr, cr) = e.roll.sin_cos();
    let (sp, cp) = e.pitch.sin_cos();
    let (sy, cy) = e.yaw.sin_cos();
    Rotation::from_matrix_unchecked([
        [cy * cr - sy * sp * sr, -sy * cp, cy * sr + sy * sp * cr],
        [sy * cr + cy * sp * sr, cy * cp, sy * sr - cy * sp * cr],
        [-cp * sr, sp, cp * cr],
    ])
}

/// Inverse of [`euler_to_rotation`]. At gimbal lock (|pitch| = pi/2) roll is
/// pinned to zero and yaw absorbs the free angle.
pub fn rotation_to_euler(r: &Rotation) -> EulerAngles {
    let m = r.matrix();
    let cos_pitch = m[2][0].hypot(m[2][2]);
    let pitch = m[2][1].atan2(cos_pitch);
    if cos_pitch < 1e-12 {
        let yaw = m[1][0].atan2(m[0][0]);
        return EulerAngles::new(0.0, pitch, wrap_angle(yaw));
    }
    let roll = (-m[2][0]).atan2(m[2][2]);
    let yaw = (-m[0][1]).atan2(m[1][1]);
    EulerAngles::new(wrap_angle(roll), pitch, wrap_angle(yaw))
}

/// Range, azimuth and elevation of a point in a radar-centered frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SphericalFix {
    pub range: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl SphericalFix {
    pub const fn new(range: f64, azimuth: f64, elevation: f64) -> Self {
        Self { range, azimuth, elevation }
    }

    pub fn is_valid(&self) -> bool {
        self.range >= 0.0
            && self.azimuth.abs() <= FRAC_PI_2
            && self.elevation.abs() <= FRAC_PI_2
            && self.range.is_finite()
    }
}

/// x = r sin(az) cos(el), y = r cos(az) cos(el), z = r sin(el).
pub fn spherical_to_point(s: SphericalFix) -> Point3 {
    let (sa, ca) = s.azimuth.sin_cos();
    let (se, ce) = s.elevation.sin_cos();
    Point3::new(s.range * sa * ce, s.range * ca * ce, s.range * se)
}

/// Inverse of [`spherical_to_point`] for points strictly in front of the
/// radar (y > 0).
pub fn point_to_spherical(p: Point3) -> Result<SphericalFix, GeometryError> {
    let range = p.norm();
    if range == 0.0 {
        return Err(GeometryError::ZeroLength);
    }
    if p.y <= 0.0 || !p.y.is_finite() {
        return Err(GeometryError::BehindRadar(p.y));
    }
    let elevation = (p.z / range).clamp(-1.0, 1.0).asin();
    let azimuth = p.x.atan2(p.y);
    Ok(SphericalFix::new(range, azimuth, elevation))
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_euler() {
        let r = euler_to_rotation(EulerAngles::default());
        assert_eq!(r.max_abs_diff(&Rotation::IDENTITY), 0.0);
        assert_eq!(rotation_to_euler(&Rotation::IDENTITY), EulerAngles::default());
    }

    #[test]
    fn yaw_quarter_turn() {
        let r = euler_to_rotation(EulerAngles::new(0.0, 0.0, FRAC_PI_2));
        let p = r * Point3::new(1.0, 0.0, 0.0);
        assert_abs_diff_eq!(p.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z, 0.0, epsilon = 1e-15);
        assert!(r.max_abs_diff(&Rotation::rot_z(FRAC_PI_2)) < 1e-15);

        let e = rotation_to_euler(&r);
        assert_abs_diff_eq!(e.roll, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.pitch, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.yaw, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn composition_order_matches_elementary_rotations() {
        let e = EulerAngles::new(0.3, -0.7, 1.9);
        let expect = Rotation::rot_z(e.yaw) * Rotation::rot_x(e.pitch) * Rotation::rot_y(e.roll);
        assert!(euler_to_rotation(e).max_abs_diff(&expect) < 1e-15);
    }

    #[test]
    fn round_trip_small_angles() {
        let e = EulerAngles::new(0.1, 0.2, 0.3);
        let back = rotation_to_euler(&euler_to_rotation(e));
        assert_abs_diff_eq!(back.roll, 0.1, epsilon = 1e-9);
        assert_abs_diff_eq!(back.pitch, 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(back.yaw, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn gimbal_lock_pins_roll() {
        let r = euler_to_rotation(EulerAngles::new(0.4, FRAC_PI_2, 0.25));
        let e = rotation_to_euler(&r);
        assert_eq!(e.roll, 0.0);
        assert_abs_diff_eq!(e.pitch, FRAC_PI_2, epsilon = 1e-12);
        assert!(euler_to_rotation(e).max_abs_diff(&r) < 1e-9);
    }

    #[test]
    fn spherical_examples() {
        let p = spherical_to_point(SphericalFix::new(2.0, 0.0, 0.0));
        assert_eq!(p, Point3::new(0.0, 2.0, 0.0));

        let p = spherical_to_point(SphericalFix::new(1.0, FRAC_PI_2, 0.0));
        assert_abs_diff_eq!(p.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.y, 0.0, epsilon = 1e-15);

        let p = spherical_to_point(SphericalFix::new(2.0, 30f64.to_radians(), 45f64.to_radians()));
        assert_abs_diff_eq!(p.x, 0.70711, epsilon = 1e-5);
        assert_abs_diff_eq!(p.y, 1.22474, epsilon = 1e-5);
        assert_abs_diff_eq!(p.z, 1.41421, epsilon = 1e-5);
    }

    #[test]
    fn point_to_spherical_examples() {
        let s = point_to_spherical(Point3::new(0.0, 2.0, 0.0)).unwrap();
        assert_eq!(s, SphericalFix::new(2.0, 0.0, 0.0));

        assert_eq!(
            point_to_spherical(Point3::new(1.0, 0.0, 0.0)),
            Err(GeometryError::BehindRadar(0.0))
        );
        assert_eq!(point_to_spherical(Point3::ORIGIN), Err(GeometryError::ZeroLength));

        let s = point_to_spherical(Point3::new(0.70711, 1.22474, 1.41421)).unwrap();
        assert_abs_diff_eq!(s.range, 2.0, epsilon = 1e-4);
        assert_abs_diff_eq!(s.azimuth.to_degrees(), 30.0, epsilon = 1e-3);
        assert_abs_diff_eq!(s.elevation.to_degrees(), 45.0, epsilon = 1e-3);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(-0.1), -0.1, epsilon = 1e-15);
    }

    fn angle() -> impl Strategy<Value = f64> {
        -PI..PI
    }

    proptest! {
        #[test]
        fn degrees_from_config_round_trip(d in -720.0..720.0f64) {
            let r = d.to_radians();
            prop_assert_eq!(invertible_degrees(r).to_radians(), r);
        }

        #[test]
        fn written_degrees_print_unchanged(tenths in -36000i32..36000) {
            let d = tenths as f64 / 10.0;
            prop_assert_eq!(invertible_degrees(d.to_radians()), d);
        }

        #[test]
        fn spherical_norm_is_range(r in 0.0f64..100.0, az in -FRAC_PI_2..FRAC_PI_2, el in -FRAC_PI_2..FRAC_PI_2) {
            let p = spherical_to_point(SphericalFix::new(r, az, el));
            prop_assert!((p.norm() - r).abs() <= 1e-12 * r.max(1e-300));
        }

        #[test]
        fn spherical_inverse(r in 0.01f64..100.0, az in -1.5f64..1.5, el in -1.5f64..1.5) {
            let p = spherical_to_point(SphericalFix::new(r, az, el));
            let back = spherical_to_point(point_to_spherical(p).unwrap());
            prop_assert!(back.distance(&p) <= 1e-9 * r);
        }

        #[test]
        fn rotation_round_trip(roll in angle(), pitch in -1.55f64..1.55, yaw in angle()) {
            let e = EulerAngles::new(roll, pitch, yaw);
            let r = euler_to_rotation(e);
            prop_assert!(r.orthonormality_error() < 1e-9);
            prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            let back = rotation_to_euler(&r);
            prop_assert!(euler_to_rotation(back).max_abs_diff(&r) < 1e-9);
            prop_assert!(wrap_angle(back.roll - roll).abs() < 1e-9);
            prop_assert!((back.pitch - pitch).abs() < 1e-9);
            prop_assert!(wrap_angle(back.yaw - yaw).abs() < 1e-9);
        }

        #[test]
        fn rotation_preserves_norm(roll in angle(), pitch in angle(), yaw in angle(),
                                   x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0) {
            let r = euler_to_rotation(EulerAngles::new(roll, pitch, yaw));
            let p = Point3::new(x, y, z);
            let n = p.norm();
            prop_assert!((r.apply(&p).norm() - n).abs() <= 1e-12 * n.max(1.0));
        }
    }
}
