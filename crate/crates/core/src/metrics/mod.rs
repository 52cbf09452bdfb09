//! Chamfer-distance average precision over the three map classes.

mod ap;
mod chamfer;
mod evaluate;

pub use ap::{ap_single, average_precision, match_frame, rank, Detection, FrameMatches};
pub use chamfer::{chamfer, densify, DenseCurve};
pub use evaluate::{evaluate, ClassReport, Counts, EvalConfig, EvalReport, DEFAULT_SAMPLE_SPACING};
