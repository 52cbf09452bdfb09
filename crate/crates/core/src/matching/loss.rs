use crate::error::{Error, Result};
use crate::map_model::{Point2, Polyline};
use crate::scalar::{sigmoid, Scalar};

const LOG_CLAMP: f64 = 1e-8;

/// Huber penalty per coordinate, summed over x and y.
#[inline]
pub fn smooth_l1<T: Scalar>(a: Point2<T>, b: Point2<T>, beta: T) -> T {
    huber(a.x - b.x, beta) + huber(a.y - b.y, beta)
}

#[inline]
fn huber<T: Scalar>(d: T, beta: T) -> T {
    let d = d.abs();
    let half = T::lit(0.5);
    if d < beta {
        half * d * d / beta
    } else {
        d - half * beta
    }
}

/// Positive-class focal term for the sigmoid probability of `gt_class`:
/// `-alpha (1 - p)^gamma log p`, with `p` clamped to at least 1e-8 inside the log.
pub fn focal_cost<T: Scalar>(logits: &[T], gt_class: usize, alpha: T, gamma: T) -> T {
    let p = sigmoid(logits[gt_class]);
    -alpha * (T::one() - p).powf(gamma) * p.max(T::lit(LOG_CLAMP)).ln()
}

/// Full per-class sigmoid focal loss against a one-hot target (`None` = background,
/// all classes negative).
pub fn sigmoid_focal_loss<T: Scalar>(logits: &[T], target: Option<usize>, alpha: T, gamma: T) -> T {
    let clamp = T::lit(LOG_CLAMP);
    logits
        .iter()
        .enumerate()
        .map(|(c, &z)| {
            let p = sigmoid(z);
            if Some(c) == target {
                -alpha * (T::one() - p).powf(gamma) * p.max(clamp).ln()
            } else {
                -(T::one() - alpha) * p.powf(gamma) * (T::one() - p).max(clamp).ln()
            }
        })
        .sum()
}

/// Sum over points of [`smooth_l1`]: the auxiliary loss supervising query
/// re-expression.
pub fn transform_loss<T: Scalar>(pred: &Polyline<T>, target: &Polyline<T>, beta: T) -> Result<T> {
    if pred.len() != target.len() {
        return Err(Error::PointCountMismatch { left: pred.len(), right: target.len() });
    }
    Ok(pred.points().iter().zip(target.points()).map(|(a, b)| smooth_l1(*a, *b, beta)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::PolylineKind;

    #[test]
    fn smooth_l1_examples() {
        let o = Point2::new(0.0f64, 0.0);
        assert_eq!(smooth_l1(o, o, 1.0), 0.0);
        assert!((smooth_l1(Point2::new(0.5, 0.0), o, 1.0) - 0.125).abs() < 1e-15);
        assert!((smooth_l1(Point2::new(2.0, 0.0), o, 1.0) - 1.5).abs() < 1e-15);
        // continuity at |d| = beta
        let beta = 0.3;
        let below = smooth_l1(Point2::new(beta - 1e-12, 0.0), o, beta);
        let above = smooth_l1(Point2::new(beta + 1e-12, 0.0), o, beta);
        assert!((below - above).abs() < 1e-10);
    }

    #[test]
    fn focal_examples() {
        assert!(focal_cost(&[1e9f64, 0.0, 0.0], 0, 0.25, 2.0).abs() < 1e-6);
        let half = focal_cost(&[0.0f64, 0.0, 0.0], 1, 0.25, 2.0);
        assert!((half - 0.25 * 0.25 * 2f64.ln()).abs() < 1e-12);
        assert!((half - 0.043321).abs() < 1e-6);
        let logit = |p: f64| (p / (1.0 - p)).ln();
        for &(a, g) in &[(0.25, 2.0), (0.5, 0.0), (0.9, 4.0)] {
            assert!(focal_cost(&[logit(0.9)], 0, a, g) < focal_cost(&[logit(0.1)], 0, a, g));
        }
        // saturated negative logit stays finite thanks to the clamp
        assert!(focal_cost(&[-1e9f64], 0, 0.25, 2.0).is_finite());
    }

    #[test]
    fn transform_loss_examples() {
        let pts: Vec<_> = (0..20).map(|i| (i as f64 / 40.0, 0.3)).collect();
        let a = Polyline::<f64>::from_xy(&pts, PolylineKind::Open).unwrap();
        assert_eq!(transform_loss(&a, &a, 1.0).unwrap(), 0.0);
        let b = a.map_points(|p| Point2::new(p.x + 0.1, p.y));
        assert!((transform_loss(&b, &a, 1.0).unwrap() - 0.1).abs() < 1e-12);
        let short = Polyline::<f64>::from_xy(&pts[..5], PolylineKind::Open).unwrap();
        assert!(transform_loss(&a, &short, 1.0).is_err());
    }

    #[test]
    fn background_focal_vanishes_for_confident_negatives() {
        assert!(sigmoid_focal_loss(&[-30.0f64, -30.0, -30.0], None, 0.25, 2.0) < 1e-12);
        assert!(sigmoid_focal_loss(&[30.0f64, -30.0, -30.0], Some(0), 0.25, 2.0) < 1e-12);
        assert!(sigmoid_focal_loss(&[30.0f64, -30.0, -30.0], None, 0.25, 2.0) > 1.0);
    }
}
