use super::geometry::Point2;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const RIGID_TOL: f64 = 1e-6;

/// 4×4 homogeneous rigid transform, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T = f64> {
    m: [[T; 4]; 4],
}

impl<T: Scalar> RigidTransform<T> {
    /// Validates the bottom row and that the rotation block is orthonormal
    /// with determinant +1 (tolerance 1e-6).
    pub fn from_matrix(m: [[T; 4]; 4]) -> Result<Self> {
        let tol = T::lit(RIGID_TOL);
        let bottom = [T::zero(), T::zero(), T::zero(), T::one()];
        if m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        if m[3].iter().zip(bottom).any(|(a, b)| (*a - b).abs() > tol) {
            return Err(Error::InvalidTransform("bottom row must be (0, 0, 0, 1)".into()));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot = (0..3).map(|k| m[k][i] * m[k][j]).sum::<T>();
                let expect = if i == j { T::one() } else { T::zero() };
                if (dot - expect).abs() > tol {
                    return Err(Error::InvalidTransform("rotation block is not orthonormal".into()));
                }
            }
        }
        let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        if (det - T::one()).abs() > tol {
            return Err(Error::InvalidTransform(format!("rotation determinant is {det}, expected +1")));
        }
        Ok(Self { m })
    }

    pub fn from_row_major(v: &[T]) -> Result<Self> {
        if v.len() != 16 {
            return Err(Error::InvalidTransform(format!("expected 16 values, got {}", v.len())));
        }
        let mut m = [[T::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row.copy_from_slice(&v[i * 4..i * 4 + 4]);
        }
        Self::from_matrix(m)
    }

    pub fn identity() -> Self {
        let mut m = [[T::zero(); 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = T::one();
        }
        Self { m }
    }

    /// Planar motion: rotation `yaw` about +z followed by translation `(tx, ty)`.
    pub fn from_yaw_translation(yaw: T, tx: T, ty: T) -> Self {
        let (s, c) = yaw.sin_cos();
        let mut t = Self::identity();
        t.m[0][0] = c;
        t.m[0][1] = -s;
        t.m[1][0] = s;
        t.m[1][1] = c;
        t.m[0][3] = tx;
        t.m[1][3] = ty;
        t
    }

    pub fn translation(tx: T, ty: T) -> Self {
        Self::from_yaw_translation(T::zero(), tx, ty)
    }

    #[inline]
    pub fn matrix(&self) -> &[[T; 4]; 4] {
        &self.m
    }

    pub fn flatten(&self) -> [T; 16] {
        let mut out = [T::zero(); 16];
        for i in 0..4 {
            out[i * 4..i * 4 + 4].copy_from_slice(&self.m[i]);
        }
        out
    }

    pub fn translation_xy(&self) -> Point2<T> {
        Point2::new(self.m[0][3], self.m[1][3])
    }

    /// `R^T`, `-R^T t`.
    pub fn inverse(&self) -> Self {
        let mut inv = Self::identity();
        for i in 0..3 {
            for j in 0..3 {
                inv.m[i][j] = self.m[j][i];
            }
        }
        for i in 0..3 {
            inv.m[i][3] = -(0..3).map(|k| self.m[k][i] * self.m[k][3]).sum::<T>();
        }
        inv
    }

    /// `self · rhs`
    pub fn compose(&self, rhs: &Self) -> Self {
        let mut out = [[T::zero(); 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.m[i][k] * rhs.m[k][j]).sum();
            }
        }
        Self { m: out }
    }

    /// Lifts `(x, y)` to `(x, y, 0, 1)`, multiplies, keeps the first two coordinates.
    #[inline]
    pub fn apply(&self, p: Point2<T>) -> Point2<T> {
        let m = &self.m;
        Point2::new(m[0][0] * p.x + m[0][1] * p.y + m[0][3], m[1][0] * p.x + m[1][1] * p.y + m[1][3])
    }

    /// Relative motion between two ego poses (ego→world): maps points from the
    /// previous ego frame into the current one, `inv(current) · previous`.
    pub fn relative(prev_pose: &Self, cur_pose: &Self) -> Self {
        cur_pose.inverse().compose(prev_pose)
    }

    pub fn cast<U: Scalar>(&self) -> RigidTransform<U> {
        let mut m = [[U::zero(); 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = U::lit(self.m[i][j].to_f64_lossy());
            }
        }
        RigidTransform { m }
    }
}
