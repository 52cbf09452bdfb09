//! Temporal state between frames: ego-motion re-expression of queries and
//! polylines, query selection, BEV warping and recurrent fusion, and the
//! per-frame `step` that ties them to the decoder.

mod bev;
mod gru;
mod pipeline;
mod poses;
mod propagation;
mod warp;

pub use bev::{BevGrid, BEV_HEADER_LEN};
pub use gru::{gru_fuse, Gate, GruWeights, GRU_NORM_EPS};
pub use pipeline::{step, FrameOutput, Memory, MemoryStats, Stream, StreamParams, DEFAULT_PROPAGATED};
pub use poses::{load_poses, read_poses, save_poses, write_poses, PoseEntry};
pub use propagation::{select_and_merge, transform_polyline, transform_queries, QueryOrigin, QueryState, TransformMlpWeights};
pub use warp::warp_bev;
