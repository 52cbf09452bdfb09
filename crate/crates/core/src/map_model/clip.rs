//! Clipping of instances against the perception window.

use super::geometry::{Point2, Polyline, PolylineKind};
use super::instance::MapInstance;
use super::range::PerceptionRange;
use crate::scalar::Scalar;

/// Liang–Barsky parameter interval of segment `a→b` inside the rectangle.
fn clip_segment<T: Scalar>(a: Point2<T>, b: Point2<T>, r: &PerceptionRange<T>) -> Option<(T, T)> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let p = [-dx, dx, -dy, dy];
    let q = [a.x + r.x_half, r.x_half - a.x, a.y + r.y_half, r.y_half - a.y];
    let mut t0 = T::zero();
    let mut t1 = T::one();
    for (pi, qi) in p.into_iter().zip(q) {
        if pi == T::zero() {
            if qi < T::zero() {
                return None;
            }
        } else {
            let t = qi / pi;
            if pi < T::zero() {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

fn clamp_into<T: Scalar>(p: Point2<T>, r: &PerceptionRange<T>) -> Point2<T> {
    Point2::new(p.x.max(-r.x_half).min(r.x_half), p.y.max(-r.y_half).min(r.y_half))
}

/// Splits `inst` into its maximal in-range runs.
///
/// Boundary crossings are interpolated exactly. A closed curve stays closed
/// only when it lies entirely inside; otherwise every run is open. Runs that
/// collapse to a point are dropped.
pub fn clip_to_range<T: Scalar>(inst: &MapInstance<T>, r: &PerceptionRange<T>) -> Vec<MapInstance<T>> {
    let pl = &inst.polyline;
    if pl.points().iter().all(|p| r.contains(*p)) {
        return vec![inst.clone()];
    }

    let mut runs: Vec<Vec<Point2<T>>> = Vec::new();
    let mut current: Vec<Point2<T>> = Vec::new();
    // whether the first run starts at vertex 0 without having been cut
    let mut first_run_starts_at_origin = false;
    let mut last_run_reaches_end = false;

    let segs: Vec<_> = pl.segments().collect();
    for (idx, (a, b)) in segs.iter().copied().enumerate() {
        match clip_segment(a, b, r) {
            Some((t0, t1)) => {
                let entered = t0 > T::zero();
                let exited = t1 < T::one();
                if entered && !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
                if current.is_empty() {
                    if idx == 0 && !entered {
                        first_run_starts_at_origin = true;
                    }
                    current.push(if entered { clamp_into(a.lerp(b, t0), r) } else { a });
                }
                current.push(if exited { clamp_into(a.lerp(b, t1), r) } else { b });
                if exited {
                    runs.push(std::mem::take(&mut current));
                } else if idx == segs.len() - 1 {
                    last_run_reaches_end = true;
                }
            }
            None => {
                if !current.is_empty() {
                    runs.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        runs.push(current);
    }

    // a closed loop cut somewhere in the middle: the tail run continues into the head run
    if pl.kind() == PolylineKind::Closed && runs.len() > 1 && first_run_starts_at_origin && last_run_reaches_end {
        let head = runs.remove(0);
        let tail = runs.last_mut().unwrap();
        tail.extend(head.into_iter().skip(1));
    }

    runs.into_iter()
        .filter_map(|mut run| {
            run.dedup();
            if run.len() < 2 {
                return None;
            }
            let poly = Polyline::new(run, PolylineKind::Open).ok()?;
            (poly.length() > T::zero()).then(|| inst.with_polyline(poly))
        })
        .collect()
}
