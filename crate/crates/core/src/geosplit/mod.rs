//! Geographic coverage of recorded drives, train/val overlap auditing, and
//! a split search that keeps validation locations out of training.

mod coverage;
mod pgm;
mod split;
mod trajectory;

pub use coverage::{coverage, overlap, scene_cells, CityOverlap, CoverageRaster, OverlapReport};
pub use pgm::{render_split, save_pgm, write_pgm, LEVEL_BOTH, LEVEL_TRAIN, LEVEL_VAL};
pub use split::{
    propose_split, BalanceEntry, CitySplit, SplitParams, SplitReport, SplitResult, DEFAULT_RADIUS, DEFAULT_RESOLUTION,
};
pub use trajectory::{load_manifest, read_manifest, Trajectory};
