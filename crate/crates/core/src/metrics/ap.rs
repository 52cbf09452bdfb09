use std::cmp::Ordering;

use super::chamfer::DenseCurve;
use super::EvalConfig;
use crate::error::Result;
use crate::map_model::{ClassId, MapInstance};
use crate::scalar::Scalar;

/// Scored detection outcome at one threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection<T> {
    pub confidence: T,
    pub true_positive: bool,
}

/// Per-frame, per-class matching outcome at every threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatches<T> {
    /// `detections[t]` lists predictions in processing order for threshold `t`.
    pub detections: Vec<Vec<Detection<T>>>,
    pub n_gt: usize,
    pub n_pred: usize,
}

/// Greedy confidence-ordered matching of one class within one frame.
///
/// Predictions are visited by descending confidence (ties: ascending Chamfer
/// to the nearest ground truth, then input order). Each takes the still
/// unmatched ground truth with the smallest Chamfer distance; it is a true
/// positive iff that distance is below the threshold, and only then is the
/// ground truth consumed.
pub fn match_frame<T: Scalar>(
    preds: &[MapInstance<T>],
    gts: &[MapInstance<T>],
    class: ClassId,
    thresholds: &[T],
    spacing: T,
) -> Result<FrameMatches<T>> {
    let preds: Vec<&MapInstance<T>> = preds.iter().filter(|p| p.class == class).collect();
    let gts: Vec<&MapInstance<T>> = gts.iter().filter(|g| g.class == class).collect();
    let gt_curves = gts.iter().map(|g| DenseCurve::new(&g.polyline, spacing)).collect::<Result<Vec<_>>>()?;
    let dist: Vec<Vec<T>> = preds
        .iter()
        .map(|p| {
            let c = DenseCurve::new(&p.polyline, spacing)?;
            Ok(gt_curves.iter().map(|g| c.chamfer(g)).collect())
        })
        .collect::<Result<_>>()?;

    let nearest = |i: usize| dist[i].iter().copied().fold(T::infinity(), T::min);
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence()
            .partial_cmp(&preds[a].confidence())
            .unwrap_or(Ordering::Equal)
            .then_with(|| nearest(a).partial_cmp(&nearest(b)).unwrap_or(Ordering::Equal))
            .then_with(|| a.cmp(&b))
    });

    let detections = thresholds
        .iter()
        .map(|&thr| {
            let mut taken = vec![false; gts.len()];
            order
                .iter()
                .map(|&i| {
                    let best = (0..gts.len())
                        .filter(|&g| !taken[g])
                        .min_by(|&x, &y| dist[i][x].partial_cmp(&dist[i][y]).unwrap_or(Ordering::Equal));
                    let tp = match best {
                        Some(g) if dist[i][g] < thr => {
                            taken[g] = true;
                            true
                        }
                        _ => false,
                    };
                    Detection { confidence: preds[i].confidence(), true_positive: tp }
                })
                .collect()
        })
        .collect();
    Ok(FrameMatches { detections, n_gt: gts.len(), n_pred: preds.len() })
}

/// All-points interpolated area under the precision–recall curve.
///
/// `detections` must already be in ranking order. Returns 0 when `n_gt == 0`.
pub fn average_precision<T: Scalar>(detections: &[Detection<T>], n_gt: usize) -> T {
    if n_gt == 0 {
        return T::zero();
    }
    let total = T::from_usize_lossy(n_gt);
    let mut tp = 0usize;
    let mut precision = Vec::with_capacity(detections.len());
    let mut recall = Vec::with_capacity(detections.len());
    for (k, d) in detections.iter().enumerate() {
        if d.true_positive {
            tp += 1;
        }
        precision.push(T::from_usize_lossy(tp) / T::from_usize_lossy(k + 1));
        recall.push(T::from_usize_lossy(tp) / total);
    }
    // precision envelope: best precision at any equal or higher recall
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = T::zero();
    let mut prev_recall = T::zero();
    for (p, r) in precision.into_iter().zip(recall) {
        ap += (r - prev_recall) * p;
        prev_recall = r;
    }
    ap
}

/// Stable ranking of pooled detections by descending confidence.
pub fn rank<T: Scalar>(detections: &mut [Detection<T>]) {
    detections.sort_by(|a, b| b.confidence.partial_cmp(&a.confidence).unwrap_or(Ordering::Equal));
}

/// AP of one class in one frame at one threshold.
pub fn ap_single<T: Scalar>(
    preds: &[MapInstance<T>],
    gts: &[MapInstance<T>],
    class: ClassId,
    threshold: T,
    cfg: &EvalConfig<T>,
) -> Result<T> {
    let m = match_frame(preds, gts, class, &[threshold], cfg.sample_spacing)?;
    let mut d = m.detections.into_iter().next().unwrap_or_default();
    rank(&mut d);
    Ok(average_precision(&d, m.n_gt))
}
