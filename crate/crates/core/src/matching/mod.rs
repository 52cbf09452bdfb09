//! Permutation-invariant polyline matching: line and focal costs, the exact
//! assignment solver and the per-frame training loss.

mod cost;
mod hungarian;
mod loss;
mod permutation;
mod training;

pub use cost::{line_cost, match_cost_matrix, permutation_group_of, CostMatrix, CostWeights, LineCost, Prediction};
pub use hungarian::{hungarian, Assignment};
pub use loss::{focal_cost, sigmoid_focal_loss, smooth_l1, transform_loss};
pub use permutation::PermutationGroup;
pub use training::{training_loss, LossBreakdown};
