//! Minimal 3D math generic over [`Scalar`]: fixed-size vectors, row-major
//! 3x3 rotation matrices and (w, x, y, z) quaternions.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

pub type Vec3<S = f64> = [S; 3];
/// Row-major 3x3 matrix.
pub type Mat3<S = f64> = [[S; 3]; 3];

#[inline]
pub fn add<S: Scalar>(a: Vec3<S>, b: Vec3<S>) -> Vec3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<S: Scalar>(a: Vec3<S>, b: Vec3<S>) -> Vec3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<S: Scalar>(a: Vec3<S>, k: f64) -> Vec3<S> {
    [a[0].scale(k), a[1].scale(k), a[2].scale(k)]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

pub fn lift<S: Scalar>(a: Vec3) -> Vec3<S> {
    [S::constant(a[0]), S::constant(a[1]), S::constant(a[2])]
}

pub fn lift_mat<S: Scalar>(m: &Mat3) -> Mat3<S> {
    [lift(m[0]), lift(m[1]), lift(m[2])]
}

#[inline]
pub fn mat_vec<S: Scalar>(m: &Mat3<S>, v: Vec3<S>) -> Vec3<S> {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// `m * v` where `v` is a constant vector; skips the lift.
#[inline]
pub fn mat_vec_const<S: Scalar>(m: &Mat3<S>, v: Vec3) -> Vec3<S> {
    [
        m[0][0].scale(v[0]) + m[0][1].scale(v[1]) + m[0][2].scale(v[2]),
        m[1][0].scale(v[0]) + m[1][1].scale(v[1]) + m[1][2].scale(v[2]),
        m[2][0].scale(v[0]) + m[2][1].scale(v[1]) + m[2][2].scale(v[2]),
    ]
}

pub fn mat_mul<S: Scalar>(a: &Mat3<S>, b: &Mat3<S>) -> Mat3<S> {
    let mut out = [[S::zero(); 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub fn transpose(m: &Mat3) -> Mat3 {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

/// `m * Rx(angle)` given the angle's cosine and sine.
#[inline]
pub fn post_rotate_x<S: Scalar>(m: &Mat3<S>, c: S, s: S) -> Mat3<S> {
    let mut out = *m;
    for row in out.iter_mut() {
        let (m1, m2) = (row[1], row[2]);
        row[1] = c * m1 + s * m2;
        row[2] = c * m2 - s * m1;
    }
    out
}

/// `m * Rz(angle)` given the angle's cosine and sine.
#[inline]
pub fn post_rotate_z<S: Scalar>(m: &Mat3<S>, c: S, s: S) -> Mat3<S> {
    let mut out = *m;
    for row in out.iter_mut() {
        let (m0, m1) = (row[0], row[1]);
        row[0] = c * m0 + s * m1;
        row[1] = c * m1 - s * m0;
    }
    out
}

/// Unit quaternion stored as (w, x, y, z).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_array(q: [f64; 4]) -> Self {
        Quat::new(q[0], q[1], q[2], q[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat::new(self.w / n, self.x / n, self.y / n, self.z / n)
    }

    pub fn conjugate(self) -> Quat {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(self, rhs: Quat) -> Quat {
        let (a, b) = (self, rhs);
        Quat::new(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    /// Exponential map of a rotation vector (axis times angle in radians).
    pub fn from_rotation_vector(v: Vec3) -> Quat {
        let angle = norm(v);
        if angle == 0.0 {
            return Quat::IDENTITY;
        }
        let half = 0.5 * angle;
        let k = half.sin() / angle;
        Quat::new(half.cos(), v[0] * k, v[1] * k, v[2] * k)
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Quat {
        Quat::from_rotation_vector(scale(normalize(axis), angle))
    }

    /// Inverse of [`Quat::from_rotation_vector`], with angle in [0, pi].
    pub fn to_rotation_vector(self) -> Vec3 {
        let q = if self.w < 0.0 {
            Quat::new(-self.w, -self.x, -self.y, -self.z)
        } else {
            self
        };
        let s = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if s == 0.0 {
            return [0.0; 3];
        }
        let angle = 2.0 * s.atan2(q.w);
        [q.x / s * angle, q.y / s * angle, q.z / s * angle]
    }

    /// Rotation angle between two orientations, radians.
    pub fn angle_to(self, other: Quat) -> f64 {
        norm(self.conjugate().mul(other).to_rotation_vector())
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_matrix(self) -> Mat3 {
        let Quat { w, x, y, z } = self;
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        mat_vec(&self.to_matrix(), v)
    }

    /// Unit quaternion of a proper rotation matrix.
    pub fn from_matrix(m: &Mat3) -> Quat {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat::new(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat::new(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat::new(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        };
        q.normalized()
    }
}
