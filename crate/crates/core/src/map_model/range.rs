use serde::{Deserialize, Serialize};

use super::geometry::{Point2, Polyline};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Axis-aligned ego-frame window `[-x_half, x_half] × [-y_half, y_half]`, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerceptionRange<T = f64> {
    pub x_half: T,
    pub y_half: T,
}

/// The two canonical evaluation windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RangePreset {
    /// 30 m front/back, 15 m left/right.
    Short,
    /// 50 m front/back, 25 m left/right.
    Long,
}

impl RangePreset {
    /// Looks a preset up by its front/back extent in meters (`30` or `50`).
    pub fn from_meters(m: u32) -> Option<Self> {
        match m {
            30 => Some(Self::Short),
            50 => Some(Self::Long),
            _ => None,
        }
    }

    pub fn half_extents(self) -> (f64, f64) {
        match self {
            Self::Short => (30.0, 15.0),
            Self::Long => (50.0, 25.0),
        }
    }

    /// Chamfer thresholds in meters used for AP at this range.
    pub fn thresholds(self) -> [f64; 3] {
        match self {
            Self::Short => [0.5, 1.0, 1.5],
            Self::Long => [1.0, 1.5, 2.0],
        }
    }
}

impl<T: Scalar> PerceptionRange<T> {
    pub fn new(x_half: T, y_half: T) -> Result<Self> {
        if !(x_half > T::zero() && y_half > T::zero()) || !x_half.is_finite() || !y_half.is_finite() {
            return Err(Error::InvalidArgument(format!("range half extents must be positive, got ({x_half}, {y_half})")));
        }
        Ok(Self { x_half, y_half })
    }

    pub fn preset(p: RangePreset) -> Self {
        let (x, y) = p.half_extents();
        Self { x_half: T::lit(x), y_half: T::lit(y) }
    }

    pub fn contains(&self, p: Point2<T>) -> bool {
        p.x.abs() <= self.x_half && p.y.abs() <= self.y_half
    }

    /// Metric ego point to the unit square.
    #[inline]
    pub fn normalize_point(&self, p: Point2<T>) -> Point2<T> {
        let two = T::lit(2.0);
        Point2::new((p.x + self.x_half) / (two * self.x_half), (p.y + self.y_half) / (two * self.y_half))
    }

    #[inline]
    pub fn denormalize_point(&self, p: Point2<T>) -> Point2<T> {
        let two = T::lit(2.0);
        Point2::new(p.x * two * self.x_half - self.x_half, p.y * two * self.y_half - self.y_half)
    }

    pub fn normalize(&self, p: &Polyline<T>) -> Polyline<T> {
        p.map_points(|q| self.normalize_point(q))
    }

    pub fn denormalize(&self, p: &Polyline<T>) -> Polyline<T> {
        p.map_points(|q| self.denormalize_point(q))
    }

    pub fn cast<U: Scalar>(&self) -> PerceptionRange<U> {
        PerceptionRange { x_half: U::lit(self.x_half.to_f64_lossy()), y_half: U::lit(self.y_half.to_f64_lossy()) }
    }
}
