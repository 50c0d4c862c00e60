use std::ops::{Add, Mul, Neg, Sub};

use super::mat3::{cross, dot, Vec3};
use crate::error::{Error, Result};

/// Real quaternion `w + x i + y j + z k`.
///
/// `w` is the real part, `(x, y, z)` the pure (vector) part.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const ZERO: Quaternion = Quaternion::new(0.0, 0.0, 0.0, 0.0);
    pub const IDENTITY: Quaternion = Quaternion::new(1.0, 0.0, 0.0, 0.0);

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quaternion::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_parts(w: f64, v: Vec3) -> Self {
        Quaternion::new(w, v[0], v[1], v[2])
    }

    /// Pure quaternion with the given vector part.
    pub fn pure(v: Vec3) -> Self {
        Quaternion::from_parts(0.0, v)
    }

    pub fn vector(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    /// Rotation by `angle` (radians) about the unit `axis`.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let (s, c) = (0.5 * angle).sin_cos();
        Quaternion::new(c, s * axis[0], s * axis[1], s * axis[2])
    }

    pub fn conjugate(self) -> Self {
        Quaternion::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn modulus_sq(self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn modulus(self) -> f64 {
        self.modulus_sq().sqrt()
    }

    /// Multiplicative inverse `q̄ / |q|²`.
    pub fn inverse(self) -> Result<Self> {
        let n2 = self.modulus_sq();
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::Domain("inverse of the zero quaternion".into()));
        }
        Ok(self.conjugate().scale(1.0 / n2))
    }

    pub fn normalized(self) -> Result<Self> {
        let n = self.modulus();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Domain("cannot normalize the zero quaternion".into()));
        }
        Ok(self.scale(1.0 / n))
    }

    pub fn scale(self, s: f64) -> Self {
        Quaternion::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, other: Quaternion) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Hamilton product `p q = p₀q₀ − p̂·q̂ + p₀q̂ + q₀p̂ + p̂×q̂`.
pub fn hmul(p: Quaternion, q: Quaternion) -> Quaternion {
    let pv = p.vector();
    let qv = q.vector();
    let c = cross(pv, qv);
    Quaternion::new(
        p.w * q.w - dot(pv, qv),
        p.w * qv[0] + q.w * pv[0] + c[0],
        p.w * qv[1] + q.w * pv[1] + c[1],
        p.w * qv[2] + q.w * pv[2] + c[2],
    )
}

impl Mul for Quaternion {
    type Output = Quaternion;
    fn mul(self, rhs: Quaternion) -> Quaternion {
        hmul(self, rhs)
    }
}

impl Add for Quaternion {
    type Output = Quaternion;
    fn add(self, r: Quaternion) -> Quaternion {
        Quaternion::new(self.w + r.w, self.x + r.x, self.y + r.y, self.z + r.z)
    }
}

impl Sub for Quaternion {
    type Output = Quaternion;
    fn sub(self, r: Quaternion) -> Quaternion {
        Quaternion::new(self.w - r.w, self.x - r.x, self.y - r.y, self.z - r.z)
    }
}

impl Neg for Quaternion {
    type Output = Quaternion;
    fn neg(self) -> Quaternion {
        self.scale(-1.0)
    }
}
