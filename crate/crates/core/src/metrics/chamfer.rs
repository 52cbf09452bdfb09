use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::map_model::{Point2, Polyline};
use crate::scalar::Scalar;

/// Samples every segment uniformly at a pitch of at most `spacing`, keeping
/// the original vertices. Cyclic relabeling or reversal of the input yields
/// the same sample set up to rounding.
pub fn densify<T: Scalar>(p: &Polyline<T>, spacing: T) -> Result<Vec<Point2<T>>> {
    if !(spacing > T::zero()) {
        return Err(Error::InvalidArgument(format!("sample spacing must be positive, got {spacing}")));
    }
    if !(p.length() > T::zero()) {
        return Err(Error::ZeroLengthPolyline);
    }
    let mut out = Vec::new();
    let two = T::lit(2.0);
    for (a, b) in p.segments() {
        let pieces = (a.dist(b) / spacing).ceil().to_usize().unwrap_or(1).max(1);
        let m = T::from_usize_lossy(pieces);
        for k in 0..pieces {
            let kk = T::from_usize_lossy(k);
            // interpolate from the nearer end so reversed segments give the same points
            out.push(if kk * two <= m { a.lerp(b, kk / m) } else { b.lerp(a, (m - kk) / m) });
        }
    }
    if !p.is_closed() {
        out.push(*p.points().last().unwrap());
    }
    Ok(out)
}

/// Mean over `from` of the distance to the nearest point of `to_sorted`
/// (which must be sorted by x).
fn mean_nearest<T: Scalar>(from: &[Point2<T>], to_sorted: &[Point2<T>]) -> T {
    let mut acc = T::zero();
    for q in from {
        let start = to_sorted.partition_point(|p| p.x < q.x);
        let mut best = T::infinity();
        for p in &to_sorted[start..] {
            let dx = p.x - q.x;
            if dx * dx >= best {
                break;
            }
            best = best.min(q.dist_sq(*p));
        }
        for p in to_sorted[..start].iter().rev() {
            let dx = q.x - p.x;
            if dx * dx >= best {
                break;
            }
            best = best.min(q.dist_sq(*p));
        }
        acc += best.sqrt();
    }
    acc / T::from_usize_lossy(from.len())
}

fn sorted_by_x<T: Scalar>(pts: &[Point2<T>]) -> Vec<Point2<T>> {
    let mut s = pts.to_vec();
    s.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap_or(Ordering::Equal));
    s
}

/// Pre-densified curve for repeated Chamfer queries.
#[derive(Debug, Clone)]
pub struct DenseCurve<T> {
    samples: Vec<Point2<T>>,
    sorted: Vec<Point2<T>>,
}

impl<T: Scalar> DenseCurve<T> {
    pub fn new(p: &Polyline<T>, spacing: T) -> Result<Self> {
        let samples = densify(p, spacing)?;
        let sorted = sorted_by_x(&samples);
        Ok(Self { samples, sorted })
    }

    pub fn samples(&self) -> &[Point2<T>] {
        &self.samples
    }

    /// Symmetric Chamfer distance, `½ (mean a→b + mean b→a)`.
    pub fn chamfer(&self, other: &Self) -> T {
        let ab = mean_nearest(&self.samples, &other.sorted);
        let ba = mean_nearest(&other.samples, &self.sorted);
        T::lit(0.5) * (ab + ba)
    }
}

/// Symmetric Chamfer distance in meters between two metric polylines.
pub fn chamfer<T: Scalar>(a: &Polyline<T>, b: &Polyline<T>, spacing: T) -> Result<T> {
    Ok(DenseCurve::new(a, spacing)?.chamfer(&DenseCurve::new(b, spacing)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::PolylineKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pl(xy: &[(f64, f64)], kind: PolylineKind) -> Polyline<f64> {
        Polyline::from_xy(xy, kind).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let a = pl(&[(0.0, 0.0), (3.0, 1.0), (4.0, 5.0)], PolylineKind::Open);
        assert_eq!(chamfer(&a, &a, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn parallel_offset() {
        let a = pl(&[(0.0, 0.0), (10.0, 0.0)], PolylineKind::Open);
        let b = pl(&[(0.0, 2.5), (10.0, 2.5)], PolylineKind::Open);
        assert!((chamfer(&a, &b, 0.1).unwrap() - 2.5).abs() < 1e-6);
    }

    #[test]
    fn spacing_respected() {
        let a = pl(&[(0.0, 0.0), (1.0, 0.0), (1.0, 0.35)], PolylineKind::Open);
        let d = densify(&a, 0.1).unwrap();
        assert_eq!(d.len(), 10 + 4 + 1);
        for w in d.windows(2) {
            assert!(w[0].dist(w[1]) <= 0.1 + 1e-12);
        }
        let sq = pl(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)], PolylineKind::Closed);
        assert_eq!(densify(&sq, 0.25).unwrap().len(), 16);
    }

    #[test]
    fn degenerate_errors() {
        let a = pl(&[(1.0, 1.0), (1.0, 1.0)], PolylineKind::Open);
        let b = pl(&[(0.0, 0.0), (1.0, 1.0)], PolylineKind::Open);
        assert!(chamfer(&a, &b, 0.1).is_err());
        assert!(chamfer(&b, &b, 0.0).is_err());
    }

    #[test]
    fn closed_relabel_and_reverse_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let pts: Vec<(f64, f64)> = (0..5).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))).collect();
            let a = pl(&pts, PolylineKind::Closed);
            let other: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))).collect();
            let b = pl(&other, PolylineKind::Open);
            let base = chamfer(&a, &b, 0.1).unwrap();
            let shifted = a.permuted(&[2, 3, 4, 0, 1]);
            assert!((chamfer(&shifted, &b, 0.1).unwrap() - base).abs() < 1e-12);
            assert!((chamfer(&a.reversed(), &b, 0.1).unwrap() - base).abs() < 1e-12);
            assert!((chamfer(&a, &b.reversed(), 0.1).unwrap() - base).abs() < 1e-12);
            assert_eq!(chamfer(&a, &b, 0.1).unwrap(), chamfer(&b, &a, 0.1).unwrap());
        }
    }
}
