//! Toolkit for vectorized online HD-map construction.
//!
//! * [`map_model`]: polylines, map instances, perception ranges, rigid transforms, map files.
//! * [`matching`]: permutation-invariant polyline cost, focal cost, exact assignment, training loss.
//! * [`metrics`]: Chamfer-distance average precision.
//! * [`streaming`]: query propagation, BEV warping and GRU fusion, the per-frame step.
//! * [`attention`]: deformable sampling, single-reference and multi-point decoder layers.
//! * [`geosplit`]: coverage rasters, train/val overlap audit, split search.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the common choices.

pub mod attention;
pub mod error;
pub mod geosplit;
pub mod linalg;
pub mod map_model;
pub mod matching;
pub mod metrics;
pub mod rng;
mod scalar;
pub mod streaming;
pub mod tensor_store;

pub use error::{Error, Result};
pub use scalar::{inverse_sigmoid, sigmoid, Scalar};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Point64 = map_model::Point2<f64>;
pub type Point32 = map_model::Point2<f32>;
pub type Polyline64 = map_model::Polyline<f64>;
pub type Polyline32 = map_model::Polyline<f32>;
pub type MapInstance64 = map_model::MapInstance<f64>;
pub type MapInstance32 = map_model::MapInstance<f32>;
pub type LocalMap64 = map_model::LocalMap<f64>;
pub type LocalMap32 = map_model::LocalMap<f32>;
pub type RigidTransform64 = map_model::RigidTransform<f64>;
pub type RigidTransform32 = map_model::RigidTransform<f32>;






pub type CostWeights64 = matching::CostWeights<f64>;
pub type CostWeights32 = matching::CostWeights<f32>;
pub type BevGrid64 = streaming::BevGrid<f64>;
pub type BevGrid32 = streaming::BevGrid<f32>;
pub type QueryState64 = streaming::QueryState<f64>;
pub type QueryState32 = streaming::QueryState<f32>;
pub type StreamParams64 = streaming::StreamParams<f64>;
pub type StreamParams32 = streaming::StreamParams<f32>;
pub type DecoderWeights64 = attention::DecoderWeights<f64>;
pub type DecoderWeights32 = attention::DecoderWeights<f32>;
