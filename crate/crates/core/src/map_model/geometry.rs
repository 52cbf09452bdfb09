use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 2-D point in the ego frame (x forward, y left) or in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> Point2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        self.dist_sq(o).sqrt()
    }

    #[inline]
    pub fn dist_sq(self, o: Self) -> T {
        let dx = self.x - o.x;
        let dy = self.y - o.y;
        dx * dx + dy * dy
    }

    /// `self + (o - self) * t`
    #[inline]
    pub fn lerp(self, o: Self, t: T) -> Self {
        Self::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }

    pub fn cast<U: Scalar>(self) -> Point2<U> {
        Point2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolylineKind {
    Open,
    /// The last point connects back to the first; the first point is not repeated.
    Closed,
}

/// Ordered point sequence with at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<T = f64> {
    points: Vec<Point2<T>>,
    kind: PolylineKind,
}

impl<T: Scalar> Polyline<T> {
    /// A closed polyline given with its first point repeated at the end has the
    /// duplicate dropped.
    pub fn new(mut points: Vec<Point2<T>>, kind: PolylineKind) -> Result<Self> {
        if kind == PolylineKind::Closed && points.len() > 2 && points.first() == points.last() {
            points.pop();
        }
        if points.len() < 2 {
            return Err(Error::TooFewPoints(points.len()));
        }
        Ok(Self { points, kind })
    }

    pub fn open(points: Vec<Point2<T>>) -> Result<Self> {
        Self::new(points, PolylineKind::Open)
    }

    pub fn closed(points: Vec<Point2<T>>) -> Result<Self> {
        Self::new(points, PolylineKind::Closed)
    }

    pub fn from_xy(xy: &[(f64, f64)], kind: PolylineKind) -> Result<Self> {
        Self::new(xy.iter().map(|&(x, y)| Point2::new(T::lit(x), T::lit(y))).collect(), kind)
    }

    #[inline]
    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    #[inline]
    pub fn kind(&self) -> PolylineKind {
        self.kind
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_closed(&self) -> bool {
        self.kind == PolylineKind::Closed
    }

    /// Segments in traversal order, including the closing one for closed curves.
    pub fn segments(&self) -> impl Iterator<Item = (Point2<T>, Point2<T>)> + '_ {
        let n = self.points.len();
        let count = if self.is_closed() { n } else { n - 1 };
        (0..count).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn length(&self) -> T {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    pub fn reversed(&self) -> Self {
        let mut points = self.points.clone();
        points.reverse();
        Self { points, kind: self.kind }
    }

    pub fn map_points(&self, f: impl FnMut(Point2<T>) -> Point2<T>) -> Self {
        Self { points: self.points.iter().copied().map(f).collect(), kind: self.kind }
    }

    /// Reindexes points: output point `j` is `self[perm[j]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self { points: perm.iter().map(|&i| self.points[i]).collect(), kind: self.kind }
    }

    pub fn with_kind(mut self, kind: PolylineKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn cast<U: Scalar>(&self) -> Polyline<U> {
        Polyline { points: self.points.iter().map(|p| p.cast()).collect(), kind: self.kind }
    }

    /// Resamples to `n` points equally spaced by arc length.
    ///
    /// Open curves keep both endpoints exactly; closed curves start at the
    /// first vertex and place `n` points around the full loop (closing segment
    /// included) without repeating the start.
    pub fn resample(&self, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("resample count must be >= 2, got {n}")));
        }
        let seg_lens: Vec<T> = self.segments().map(|(a, b)| a.dist(b)).collect();
        let total: T = seg_lens.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::ZeroLengthPolyline);
        }
        let divisions = if self.is_closed() { n } else { n - 1 };
        let step = total / T::from_usize_lossy(divisions);

        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        let mut seg_start = T::zero();
        let segs: Vec<_> = self.segments().collect();
        for k in 0..n {
            if !self.is_closed() && k == n - 1 {
                out.push(*self.points.last().unwrap());
                break;
            }
            let target = step * T::from_usize_lossy(k);
            while seg + 1 < segs.len() && seg_start + seg_lens[seg] < target {
                seg_start += seg_lens[seg];
                seg += 1;
            }
            let (a, b) = segs[seg];
            let len = seg_lens[seg];
            let t = if len > T::zero() { ((target - seg_start) / len).max(T::zero()).min(T::one()) } else { T::zero() };
            out.push(a.lerp(b, t));
        }
        Ok(Self { points: out, kind: self.kind })
    }
}
