use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{focal_cost, smooth_l1};
use super::permutation::{group_size, permuted_index, PermutationGroup};
use crate::error::{Error, Result};
use crate::map_model::{ClassId, MapInstance, Polyline};
use crate::scalar::Scalar;

/// Loss and matching weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights<T = f64> {
    /// polyline regression weight
    pub lambda1: T,
    /// classification weight
    pub lambda2: T,
    /// auxiliary transform-loss weight
    pub lambda3: T,
    pub focal_alpha: T,
    pub focal_gamma: T,
    /// Huber transition point, in normalized coordinates
    pub smooth_l1_beta: T,
}

impl<T: Scalar> Default for CostWeights<T> {
    fn default() -> Self {
        Self {
            lambda1: T::lit(50.0),
            lambda2: T::lit(5.0),
            lambda3: T::lit(5.0),
            focal_alpha: T::lit(0.25),
            focal_gamma: T::lit(2.0),
            smooth_l1_beta: T::lit(1.0),
        }
    }
}

impl<T: Scalar> CostWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3, self.focal_alpha, self.focal_gamma, self.smooth_l1_beta];
        if all.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidArgument("cost weights must be finite and non-negative".into()));
        }
        if !(self.smooth_l1_beta > T::zero()) {
            return Err(Error::InvalidArgument("smooth_l1_beta must be positive".into()));
        }
        Ok(())
    }
}

/// A predicted instance before thresholding: per-class logits and a
/// normalized polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T = f64> {
    pub logits: [T; ClassId::COUNT],
    pub polyline: Polyline<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineCost<T> {
    pub cost: T,
    /// Group element applied to the ground truth: pred point `j` pairs with gt point `permutation[j]`.
    pub permutation: Vec<usize>,
}

/// Minimum over the ground truth's permutation group of the mean Huber
/// distance between corresponding points. Ties keep the first group element
/// (identity first).
pub fn line_cost<T: Scalar>(pred: &Polyline<T>, gt: &Polyline<T>, w: &CostWeights<T>) -> Result<LineCost<T>> {
    let (cost, g) = line_cost_index(pred, gt, w.smooth_l1_beta)?;
    let n = gt.len();
    let permutation = (0..n).map(|j| permuted_index(gt.kind(), n, g, j)).collect();
    Ok(LineCost { cost, permutation })
}

pub(crate) fn line_cost_index<T: Scalar>(pred: &Polyline<T>, gt: &Polyline<T>, beta: T) -> Result<(T, usize)> {
    let n = gt.len();
    if pred.len() != n {
        return Err(Error::PointCountMismatch { left: pred.len(), right: n });
    }
    let inv_n = T::one() / T::from_usize_lossy(n);
    let (pp, gp) = (pred.points(), gt.points());
    let mut best = (T::infinity(), 0usize);
    for g in 0..group_size(gt.kind(), n) {
        let mut acc = T::zero();
        for (j, p) in pp.iter().enumerate() {
            acc += smooth_l1(*p, gp[permuted_index(gt.kind(), n, g, j)], beta);
        }
        let c = acc * inv_n;
        if c < best.0 {
            best = (c, g);
        }
    }
    Ok(best)
}

/// The permutation group used for a ground-truth curve.
pub fn permutation_group_of<T: Scalar>(gt: &Polyline<T>) -> PermutationGroup {
    PermutationGroup::new(gt.kind(), gt.len())
}

/// Dense row-major matrix; rows are predictions, columns ground truths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostMatrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} entries for a {rows}x{cols} matrix", data.len())));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transposed(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for c in 0..self.cols {
            for r in 0..self.rows {
                data.push(self.get(r, c));
            }
        }
        Self { rows: self.cols, cols: self.rows, data }
    }
}

/// `lambda1 · line_cost + lambda2 · focal_cost` for every (prediction, ground truth) pair.
pub fn match_cost_matrix<T: Scalar>(preds: &[Prediction<T>], gts: &[MapInstance<T>], w: &CostWeights<T>) -> Result<CostMatrix<T>> {
    let rows: Vec<Vec<T>> = preds
        .par_iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    let (line, _) = line_cost_index(&p.polyline, &g.polyline, w.smooth_l1_beta)?;
                    let cls = focal_cost(&p.logits, g.class.index(), w.focal_alpha, w.focal_gamma);
                    Ok(w.lambda1 * line + w.lambda2 * cls)
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<_>>()?;
    let data = rows.concat();
    CostMatrix::new(preds.len(), gts.len(), data)
}
