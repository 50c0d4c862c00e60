use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

/// Dense 3×3 real tensor, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat3(pub [[f64; 3]; 3]);

pub type Vec3 = [f64; 3];

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Self {
        Mat3(rows)
    }

    pub fn from_diagonal(d: Vec3) -> Self {
        let mut m = Mat3::ZERO;
        for i in 0..3 {
            m.0[i][i] = d[i];
        }
        m
    }

    pub fn scaled_identity(s: f64) -> Self {
        Mat3::from_diagonal([s, s, s])
    }

    /// Dyadic product `a ⊗ b`, i.e. `(a ⊗ b)_ij = a_i b_j`.
    pub fn outer(a: Vec3, b: Vec3) -> Self {
        let mut m = Mat3::ZERO;
        for i in 0..3 {
            for j in 0..3 {
                m.0[i][j] = a[i] * b[j];
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let a = &self.0;
        Mat3([
            [a[0][0], a[1][0], a[2][0]],
            [a[0][1], a[1][1], a[2][1]],
            [a[0][2], a[1][2], a[2][2]],
        ])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn sym(&self) -> Self {
        (*self + self.transpose()) * 0.5
    }

    pub fn skw(&self) -> Self {
        (*self - self.transpose()) * 0.5
    }

    /// Deviatoric part `A − tr(A)/3 · I`.
    pub fn dev(&self) -> Self {
        *self - Mat3::scaled_identity(self.trace() / 3.0)
    }

    /// Frobenius inner product `A : B = tr(AᵀB)`.
    pub fn inner(&self, other: &Mat3) -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.inner(self)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn det(&self) -> f64 {
        let a = &self.0;
        a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
            - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
            + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
    }

    /// Matrix of cofactors; `inverse = cofactor(A)ᵀ / det(A)`.
    fn cofactor(&self) -> Mat3 {
        let a = &self.0;
        Mat3([
            [
                a[1][1] * a[2][2] - a[1][2] * a[2][1],
                a[1][2] * a[2][0] - a[1][0] * a[2][2],
                a[1][0] * a[2][1] - a[1][1] * a[2][0],
            ],
            [
                a[0][2] * a[2][1] - a[0][1] * a[2][2],
                a[0][0] * a[2][2] - a[0][2] * a[2][0],
                a[0][1] * a[2][0] - a[0][0] * a[2][1],
            ],
            [
                a[0][1] * a[1][2] - a[0][2] * a[1][1],
                a[0][2] * a[1][0] - a[0][0] * a[1][2],
                a[0][0] * a[1][1] - a[0][1] * a[1][0],
            ],
        ])
    }

    /// Inverse, or `None` when `|det| ≤ tiny · ‖A‖³`.
    pub fn inverse(&self) -> Option<Mat3> {
        let det = self.det();
        let scale = self.frobenius_norm().powi(3);
        if !det.is_finite() || det.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        Some(self.cofactor().transpose() * (1.0 / det))
    }

    /// Inverse transpose `A⁻ᵀ`.
    pub fn inverse_transpose(&self) -> Option<Mat3> {
        self.inverse().map(|m| m.transpose())
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let a = &self.0;
        [
            a[0][0] * v[0] + a[0][1] * v[1] + a[0][2] * v[2],
            a[1][0] * v[0] + a[1][1] * v[1] + a[1][2] * v[2],
            a[2][0] * v[0] + a[2][1] * v[1] + a[2][2] * v[2],
        ]
    }

    pub fn max_abs_diff(&self, other: &Mat3) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((self.0[i][j] - other.0[i][j]).abs());
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.0[i][j]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.0[i][j]
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(mut self, rhs: Mat3) -> Mat3 {
        self += rhs;
        self
    }
}

impl AddAssign for Mat3 {
    fn add_assign(&mut self, rhs: Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += rhs.0[i][j];
            }
        }
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(mut self, rhs: Mat3) -> Mat3 {
        self -= rhs;
        self
    }
}

impl SubAssign for Mat3 {
    fn sub_assign(&mut self, rhs: Mat3) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] -= rhs.0[i][j];
            }
        }
    }
}

impl Neg for Mat3 {
    type Output = Mat3;
    fn neg(self) -> Mat3 {
        self * -1.0
    }
}

impl Mul<f64> for Mat3 {
    type Output = Mat3;
    fn mul(mut self, s: f64) -> Mat3 {
        for row in self.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        self
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        let a = &self.0;
        let b = &rhs.0;
        let mut c = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
            }
        }
        Mat3(c)
    }
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
