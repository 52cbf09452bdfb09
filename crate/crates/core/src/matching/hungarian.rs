//! Exact minimum-cost assignment (shortest augmenting paths with dual
//! potentials, O(n² m)).

use serde::Serialize;

use super::cost::CostMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One-to-one pairing of predictions (rows) with ground truths (columns).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Assignment {
    /// `(pred_index, gt_index)`, sorted by prediction index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_preds: Vec<usize>,
}

impl Assignment {
    pub fn total_cost<T: Scalar>(&self, costs: &CostMatrix<T>) -> T {
        self.pairs.iter().map(|&(r, c)| costs.get(r, c)).sum()
    }

    /// Ground truth matched to `pred`, if any.
    pub fn gt_of(&self, pred: usize) -> Option<usize> {
        self.pairs.iter().find(|p| p.0 == pred).map(|p| p.1)
    }
}

/// Minimizes the total cost over all assignments of size `min(rows, cols)`.
pub fn hungarian<T: Scalar>(costs: &CostMatrix<T>) -> Result<Assignment> {
    if costs.rows() == 0 || costs.cols() == 0 {
        return Ok(Assignment { pairs: Vec::new(), unmatched_preds: (0..costs.rows()).collect() });
    }
    for r in 0..costs.rows() {
        if costs.row(r).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite cost in row {r}")));
        }
    }
    let mut pairs = if costs.rows() <= costs.cols() {
        solve_wide(costs)
    } else {
        solve_wide(&costs.transposed()).into_iter().map(|(c, r)| (r, c)).collect()
    };
    pairs.sort_unstable();
    let mut matched = vec![false; costs.rows()];
    for &(r, _) in &pairs {
        matched[r] = true;
    }
    let unmatched_preds = (0..costs.rows()).filter(|&r| !matched[r]).collect();
    Ok(Assignment { pairs, unmatched_preds })
}

/// Requires `rows <= cols`; every row gets a column.
fn solve_wide<T: Scalar>(a: &CostMatrix<T>) -> Vec<(usize, usize)> {
    let (n, m) = (a.rows(), a.cols());
    // 1-based; index 0 is the virtual source column
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![T::infinity(); m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = T::infinity();
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a.get(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m).filter(|&j| row_of_col[j] != 0).map(|j| (row_of_col[j] - 1, j - 1)).collect()
}
