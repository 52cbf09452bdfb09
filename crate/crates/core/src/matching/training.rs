use serde::Serialize;

use super::cost::{line_cost_index, CostWeights, Prediction};
use super::hungarian::Assignment;
use super::loss::{sigmoid_focal_loss, transform_loss};
use crate::error::{Error, Result};
use crate::map_model::{MapInstance, Polyline};
use crate::scalar::Scalar;

/// Per-term training loss. `total = lambda1·line + lambda2·focal + lambda3·trans`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown<T = f64> {
    pub line: T,
    pub focal: T,
    pub trans: T,
    pub total: T,
}

/// Set-prediction loss for one frame.
///
/// * `line`: sum of permutation-invariant line costs over matched pairs,
///   divided by `max(1, |gts|)`.
/// * `focal`: per-class sigmoid focal loss of every prediction (one-hot target
///   when matched, all-negative when unmatched), divided by `max(1, |gts|)`.
/// * `trans`: mean over `trans_pairs` of the summed per-point Huber loss
///   between the regressed and the re-expressed polylines; 0 when empty.
pub fn training_loss<T: Scalar>(
    preds: &[Prediction<T>],
    gts: &[MapInstance<T>],
    assignment: &Assignment,
    w: &CostWeights<T>,
    trans_pairs: &[(Polyline<T>, Polyline<T>)],
) -> Result<LossBreakdown<T>> {
    let norm = T::from_usize_lossy(gts.len().max(1));
    let mut target = vec![None; preds.len()];
    let mut line = T::zero();
    for &(p, g) in &assignment.pairs {
        if p >= preds.len() || g >= gts.len() {
            return Err(Error::InvalidArgument(format!("assignment pair ({p}, {g}) out of bounds")));
        }
        target[p] = Some(gts[g].class.index());
        line += line_cost_index(&preds[p].polyline, &gts[g].polyline, w.smooth_l1_beta)?.0;
    }
    let line = line / norm;
    let focal = preds
        .iter()
        .zip(&target)
        .map(|(p, t)| sigmoid_focal_loss(&p.logits, *t, w.focal_alpha, w.focal_gamma))
        .sum::<T>()
        / norm;
    let trans = if trans_pairs.is_empty() {
        T::zero()
    } else {
        let mut acc = T::zero();
        for (pred, tgt) in trans_pairs {
            acc += transform_loss(pred, tgt, w.smooth_l1_beta)?;
        }
        acc / T::from_usize_lossy(trans_pairs.len())
    };
    let mut total = w.lambda1 * line + w.lambda2 * focal;
    if w.lambda3 != T::zero() {
        total += w.lambda3 * trans;
    }
    Ok(LossBreakdown { line, focal, trans, total })
}
