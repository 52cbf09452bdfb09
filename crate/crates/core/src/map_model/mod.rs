//! Vectorized local-map types: polylines, instances, ranges, rigid transforms
//! and the `.vmap.jsonl` file format.

mod clip;
mod geometry;
pub mod io;
mod instance;
mod range;
mod transform;

pub use clip::clip_to_range;
pub use io::{frame_from_line, frame_to_line, load_maps, read_maps, save_maps, write_maps};
pub use geometry::{Point2, Polyline, PolylineKind};
pub use instance::{ClassId, LocalMap, MapInstance};
pub use range::{PerceptionRange, RangePreset};
pub use transform::RigidTransform;
