//! Small f64 vector / quaternion toolkit used by every other module.
//!
//! World frame is right-handed and y-up. Objects face local +z; cameras look
//! down their local -z.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Self = Self::new(0.0, 0.0, 0.0);
    pub const ONE: Self = Self::new(1.0, 1.0, 1.0);
    pub const X: Self = Self::new(1.0, 0.0, 0.0);
    pub const Y: Self = Self::new(0.0, 1.0, 0.0);
    pub const Z: Self = Self::new(0.0, 0.0, 1.0);

    #[inline]
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn splat(v: f64) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Self) -> f64 {
        (self - o).length()
    }

    /// Unit vector in the same direction, or `None` for (near) zero input.
    pub fn try_normalize(self) -> Option<Self> {
        let len = self.length();
        if len > 1e-300 && len.is_finite() {
            Some(self / len)
        } else {
            None
        }
    }

    pub fn normalize_or(self, fallback: Self) -> Self {
        self.try_normalize().unwrap_or(fallback)
    }

    #[inline]
    pub fn mul_elem(self, o: Self) -> Self {
        Self::new(self.x * o.x, self.y * o.y, self.z * o.z)
    }

    #[inline]
    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    #[inline]
    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    /// Any unit vector perpendicular to `self` (which must be nonzero).
    pub fn any_orthogonal(self) -> Self {
        let a = if self.x.abs() < 0.9 { Self::X } else { Self::Y };
        self.cross(a).normalize_or(Self::Z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl Add for Vec3 {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        Self::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major 3x3 matrix. Only used for rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3 {
    pub rows: [[f64; 3]; 3],
}

impl Mat3 {
    pub const IDENTITY: Self = Self {
        rows: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    pub fn from_cols(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        Self {
            rows: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn col(&self, i: usize) -> Vec3 {
        Vec3::new(self.rows[0][i], self.rows[1][i], self.rows[2][i])
    }

    pub fn transpose(&self) -> Self {
        let r = &self.rows;
        Self {
            rows: [
                [r[0][0], r[1][0], r[2][0]],
                [r[0][1], r[1][1], r[2][1]],
                [r[0][2], r[1][2], r[2][2]],
            ],
        }
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Mat3) -> Mat3 {
        let mut rows = [[0.0; 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Mat3 { rows }
    }
}

/// Unit quaternion (w, x, y, z).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Self = Self {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn from_wxyz(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    /// Rotation of `radians` about `axis` (normalized internally).
    pub fn from_axis_angle(axis: Vec3, radians: f64) -> Self {
        let a = axis.normalize_or(Vec3::Y);
        let (s, c) = (radians * 0.5).sin_cos();
        Self::from_wxyz(c, a.x * s, a.y * s, a.z * s)
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalize(self) -> Self {
        let n = self.norm();
        if n < 1e-300 || !n.is_finite() {
            return Self::IDENTITY;
        }
        Self::from_wxyz(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Self {
        Self::from_wxyz(self.w, -self.x, -self.y, -self.z)
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    pub fn to_mat3(self) -> Mat3 {
        Mat3::from_cols(self.rotate(Vec3::X), self.rotate(Vec3::Y), self.rotate(Vec3::Z))
    }

    /// Shortest-arc rotation taking unit direction `from` onto unit direction `to`.
    pub fn from_rotation_arc(from: Vec3, to: Vec3) -> Self {
        let d = from.dot(to).clamp(-1.0, 1.0);
        if d > 1.0 - 1e-15 {
            return Self::IDENTITY;
        }
        if d < -1.0 + 1e-15 {
            return Self::from_axis_angle(from.any_orthogonal(), std::f64::consts::PI);
        }
        let axis = from.cross(to);
        Self::from_wxyz(1.0 + d, axis.x, axis.y, axis.z).normalize()
    }

    /// Quaternion from a proper rotation matrix (Shepperd's method).
    pub fn from_mat3(m: &Mat3) -> Self {
        let r = &m.rows;
        let trace = r[0][0] + r[1][1] + r[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Self::from_wxyz(
                0.25 * s,
                (r[2][1] - r[1][2]) / s,
                (r[0][2] - r[2][0]) / s,
                (r[1][0] - r[0][1]) / s,
            )
        } else if r[0][0] > r[1][1] && r[0][0] > r[2][2] {
            let s = (1.0 + r[0][0] - r[1][1] - r[2][2]).sqrt() * 2.0;
            Self::from_wxyz(
                (r[2][1] - r[1][2]) / s,
                0.25 * s,
                (r[0][1] + r[1][0]) / s,
                (r[0][2] + r[2][0]) / s,
            )
        } else if r[1][1] > r[2][2] {
            let s = (1.0 + r[1][1] - r[0][0] - r[2][2]).sqrt() * 2.0;
            Self::from_wxyz(
                (r[0][2] - r[2][0]) / s,
                (r[0][1] + r[1][0]) / s,
                0.25 * s,
                (r[1][2] + r[2][1]) / s,
            )
        } else {
            let s = (1.0 + r[2][2] - r[0][0] - r[1][1]).sqrt() * 2.0;
            Self::from_wxyz(
                (r[1][0] - r[0][1]) / s,
                (r[0][2] + r[2][0]) / s,
                (r[1][2] + r[2][1]) / s,
                0.25 * s,
            )
        };
        q.normalize()
    }

    /// Intrinsic yaw (about +y), then pitch (about +x), then roll (about +z),
    /// all in degrees: `q = Ry(yaw) * Rx(pitch) * Rz(roll)`.
    pub fn from_euler_deg(yaw: f64, pitch: f64, roll: f64) -> Self {
        let qy = Self::from_axis_angle(Vec3::Y, yaw.to_radians());
        let qx = Self::from_axis_angle(Vec3::X, pitch.to_radians());
        let qz = Self::from_axis_angle(Vec3::Z, roll.to_radians());
        (qy * qx * qz).normalize()
    }

    /// Inverse of [`Quat::from_euler_deg`]; returns (yaw, pitch, roll) degrees.
    ///
    /// Pitch lies in [-90, 90]. At gimbal lock the whole twist is reported as
    /// yaw with zero roll.
    pub fn to_euler_deg(self) -> (f64, f64, f64) {
        let m = self.to_mat3().rows;
        // R = Ry Rx Rz: m[1][2] = -sin(pitch)
        let sp = (-m[1][2]).clamp(-1.0, 1.0);
        let pitch = sp.asin();
        let (yaw, roll) = if sp.abs() < 1.0 - 1e-12 {
            (m[0][2].atan2(m[2][2]), m[1][0].atan2(m[1][1]))
        } else {
            // cos(pitch) == 0: only yaw - sign*roll is determined
            ((-m[2][0]).atan2(m[0][0]), 0.0)
        };
        (yaw.to_degrees(), pitch.to_degrees(), roll.to_degrees())
    }

    /// Angle in radians between two rotations.
    pub fn angle_to(self, o: Self) -> f64 {
        let d = (self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z)
            .abs()
            .min(1.0);
        2.0 * d.acos()
    }
}

impl Mul for Quat {
    type Output = Quat;

    /// Hamilton product `self * o` (apply `o` first, then `self`).
    fn mul(self, o: Self) -> Self {
        Self::from_wxyz(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }
}

/// Look-at rotation for a camera at `eye` looking toward `target` (camera
/// forward is local -z, local +y is as close to world up as possible).
pub fn look_at_rotation(eye: Vec3, target: Vec3) -> Quat {
    let forward = (target - eye).normalize_or(-Vec3::Z);
    let mut right = forward.cross(Vec3::Y);
    if right.length() < 1e-9 {
        right = Vec3::X;
    }
    let right = right.normalize_or(Vec3::X);
    let up = right.cross(forward);
    Quat::from_mat3(&Mat3::from_cols(right, up, -forward))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn euler_round_trip() {
        for &(y, p, r) in &[(0.0, 0.0, 0.0), (90.0, 0.0, 0.0), (30.0, -45.0, 10.0), (-170.0, 80.0, -60.0)] {
            let (y2, p2, r2) = Quat::from_euler_deg(y, p, r).to_euler_deg();
            assert_abs_diff_eq!(y, y2, epsilon = 1e-9);
            assert_abs_diff_eq!(p, p2, epsilon = 1e-9);
            assert_abs_diff_eq!(r, r2, epsilon = 1e-9);
        }
    }

    #[test]
    fn yaw_turns_front_toward_plus_x() {
        let q = Quat::from_euler_deg(90.0, 0.0, 0.0);
        let f = q.rotate(Vec3::Z);
        assert_abs_diff_eq!(f.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gimbal_lock_keeps_rotation() {
        let q = Quat::from_euler_deg(30.0, 90.0, 20.0);
        let (y, p, r) = q.to_euler_deg();
        let back = Quat::from_euler_deg(y, p, r);
        assert!(q.angle_to(back) < 1e-7);
    }

    #[test]
    fn matrix_round_trip_and_arc() {
        let q = Quat::from_euler_deg(12.0, 34.0, -56.0);
        assert!(Quat::from_mat3(&q.to_mat3()).angle_to(q) < 1e-12);
        let a = Vec3::new(1.0, 2.0, 3.0).normalize_or(Vec3::X);
        let b = Vec3::new(-3.0, 0.5, 1.0).normalize_or(Vec3::X);
        let r = Quat::from_rotation_arc(a, b).rotate(a);
        assert!(r.distance(b) < 1e-12);
        let opp = Quat::from_rotation_arc(a, -a).rotate(a);
        assert!(opp.distance(-a) < 1e-12);
    }

    #[test]
    fn look_at_points_forward() {
        let eye = Vec3::new(0.0, 1.6, 3.0);
        let q = look_at_rotation(eye, Vec3::ZERO);
        let fwd = q.rotate(-Vec3::Z);
        let want = (Vec3::ZERO - eye).normalize_or(Vec3::Z);
        assert!(fwd.distance(want) < 1e-12);
        assert!(q.rotate(Vec3::X).y.abs() < 1e-12);
    }
}
