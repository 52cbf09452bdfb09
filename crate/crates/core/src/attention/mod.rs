//! Forward kernels for the map decoder: deformable sampling of a BEV raster,
//! the single-reference layer, multi-point attention, and the stacked decoder.

mod config;
mod decoder;
mod layers;
mod sampling;

pub use config::AttentionConfig;
pub use decoder::{decode, query_to_instance, run_layers, DecodeOutput, DecoderLayerWeights, DecoderWeights, DECODER_NORM_EPS};
pub(crate) use decoder::finish;
pub use layers::{baseline_layer, mpa_attend, mpa_layer, regress_points, BaselineLayerWeights, MpaLayerWeights};
pub use sampling::{deformable_sample, Sampler};
