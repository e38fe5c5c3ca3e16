//! Fixed-size vectors and matrices over [`Scalar`].

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Three-component column vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vec3<S = f64> {
    pub x: S,
    pub y: S,
    pub z: S,
}

impl<S: Scalar> Vec3<S> {
    #[inline]
    pub const fn new(x: S, y: S, z: S) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(S::zero(), S::zero(), S::zero())
    }

    pub fn from_f64(v: Vec3<f64>) -> Self {
        Self::new(S::from_f64(v.x), S::from_f64(v.y), S::from_f64(v.z))
    }

    pub fn to_f64(self) -> Vec3<f64> {
        Vec3::new(self.x.to_f64(), self.y.to_f64(), self.z.to_f64())
    }

    #[inline]
    pub fn dot(self, o: Self) -> S {
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
    pub fn norm_squared(self) -> S {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> S {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(self, k: S) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [S; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [S; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// Skew-symmetric matrix `[v ×]` with `[v ×] w = v × w`.
    pub fn skew(self) -> Matrix<S, 3, 3> {
        let o = S::zero();
        Matrix([
            [o, -self.z, self.y],
            [self.z, o, -self.x],
            [-self.y, self.x, o],
        ])
    }

    pub fn to_column(self) -> Matrix<S, 3, 1> {
        Matrix([[self.x], [self.y], [self.z]])
    }
}

impl<S: Scalar> Add for Vec3<S> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<S: Scalar> Sub for Vec3<S> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<S: Scalar> Neg for Vec3<S> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Row-major `R × C` matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Matrix<S, const R: usize, const C: usize>(pub [[S; C]; R]);

pub type Mat3<S = f64> = Matrix<S, 3, 3>;

impl<S: Scalar, const R: usize, const C: usize> Matrix<S, R, C> {
    pub fn zeros() -> Self {
        Matrix([[S::zero(); C]; R])
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros();
        for i in 0..R {
            for j in 0..C {
                m.0[i][j] = f(i, j);
            }
        }
        m
    }

    pub fn transpose(&self) -> Matrix<S, C, R> {
        Matrix::from_fn(|i, j| self.0[j][i])
    }

    pub fn scale(&self, k: S) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * k)
    }

    pub fn map_f64(&self) -> Matrix<f64, R, C> {
        Matrix::from_fn(|i, j| self.0[i][j].to_f64())
    }

    pub fn from_f64(m: &Matrix<f64, R, C>) -> Self {
        Self::from_fn(|i, j| S::from_f64(m.0[i][j]))
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> S {
        let mut acc = S::zero();
        for row in &self.0 {
            for &v in row {
                acc = acc + v * v;
            }
        }
        acc.sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..C)
            .map(|j| (0..R).map(|i| self.0[i][j].to_f64().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl<S: Scalar, const N: usize> Matrix<S, N, N> {
    pub fn identity() -> Self {
        Self::from_fn(|i, j| if i == j { S::one() } else { S::zero() })
    }

    pub fn from_diagonal(d: [S; N]) -> Self {
        Self::from_fn(|i, j| if i == j { d[i] } else { S::zero() })
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrize(&self) -> Self {
        let half = S::from_f64(0.5);
        Self::from_fn(|i, j| {
            if i == j {
                self.0[i][i]
            } else {
                (self.0[i][j] + self.0[j][i]) * half
            }
        })
    }

    pub fn trace(&self) -> S {
        let mut t = S::zero();
        for i in 0..N {
            t = t + self.0[i][i];
        }
        t
    }

    /// Gauss-Jordan inverse with partial pivoting. `None` on an exactly zero
    /// pivot; conditioning is the caller's concern.
    pub fn inverse(&self) -> Option<Self> {
        let mut a = *self;
        let mut inv = Self::identity();
        for col in 0..N {
            let pivot = (col..N).max_by(|&r1, &r2| {
                a.0[r1][col]
                    .abs()
                    .partial_cmp(&a.0[r2][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a.0[pivot][col].to_f64() == 0.0 || !a.0[pivot][col].is_finite() {
                return None;
            }
            a.0.swap(col, pivot);
            inv.0.swap(col, pivot);
            let p = a.0[col][col];
            for j in 0..N {
                a.0[col][j] = a.0[col][j] / p;
                inv.0[col][j] = inv.0[col][j] / p;
            }
            for r in 0..N {
                if r == col {
                    continue;
                }
                let f = a.0[r][col];
                if f.to_f64() == 0.0 {
                    continue;
                }
                for j in 0..N {
                    a.0[r][j] = a.0[r][j] - f * a.0[col][j];
                    inv.0[r][j] = inv.0[r][j] - f * inv.0[col][j];
                }
            }
        }
        Some(inv)
    }
}

impl<S: Scalar> Mat3<S> {
    pub fn mul_vec(&self, v: Vec3<S>) -> Vec3<S> {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn determinant(&self) -> S {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn row(&self, i: usize) -> Vec3<S> {
        Vec3::from_array(self.0[i])
    }
}

impl<S: Scalar, const R: usize, const K: usize, const C: usize> Mul<Matrix<S, K, C>>
    for Matrix<S, R, K>
{
    type Output = Matrix<S, R, C>;

    fn mul(self, rhs: Matrix<S, K, C>) -> Matrix<S, R, C> {
        Matrix::from_fn(|i, j| {
            let mut acc = self.0[i][0] * rhs.0[0][j];
            for k in 1..K {
                acc = acc + self.0[i][k] * rhs.0[k][j];
            }
            acc
        })
    }
}

impl<S: Scalar, const R: usize, const C: usize> Add for Matrix<S, R, C> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<S: Scalar, const R: usize, const C: usize> Sub for Matrix<S, R, C> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<S, const R: usize, const C: usize> Index<(usize, usize)> for Matrix<S, R, C> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.0[i][j]
    }
}

impl<S, const R: usize, const C: usize> IndexMut<(usize, usize)> for Matrix<S, R, C> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.0[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skew_matches_cross_product() {
        let a = Vec3::new(0.3, -1.2, 2.0);
        let b = Vec3::new(-0.7, 0.4, 1.1);
        let lhs = a.skew().mul_vec(b);
        let rhs = a.cross(b);
        assert!((lhs - rhs).norm() < 1e-15);
    }

    #[test]
    fn inverse_of_well_conditioned_matrix() {
        let m: Matrix<f64, 4, 4> = Matrix([
            [4.0, 1.0, 0.0, 0.5],
            [1.0, 3.0, 0.2, 0.0],
            [0.0, 0.2, 2.0, 0.1],
            [0.5, 0.0, 0.1, 1.0],
        ]);
        let inv = m.inverse().unwrap();
        let err = (m * inv - Matrix::identity()).norm_fro();
        assert!(err < 1e-14, "{err}");
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let m: Mat3 = Matrix([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]]);
        assert!(m.inverse().is_none());
    }
}
