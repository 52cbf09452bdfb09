use std::ops::Range;

use rayon::prelude::*;

use super::config::AttentionConfig;
use super::layers::{mpa_attend, regress_points, MpaLayerWeights};
use super::sampling::Sampler;
use crate::error::{Error, Result};
use crate::linalg::{softmax, LayerNorm, Linear, Mlp};
use crate::map_model::{ClassId, MapInstance, PerceptionRange, Point2, Polyline};
use crate::rng::XorShift64Star;
use crate::scalar::{sigmoid, Scalar};
use crate::streaming::{BevGrid, QueryOrigin, QueryState};
use crate::tensor_store::TensorStore;

pub const DECODER_NORM_EPS: f64 = 1e-5;

/// One decoder layer: pre-norm self-attention (residual), multi-point
/// cross-attention replacing the query, pre-norm feed-forward (residual).
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderLayerWeights<T> {
    pub sa_norm: LayerNorm<T>,
    pub sa_q: Linear<T>,
    pub sa_k: Linear<T>,
    pub sa_v: Linear<T>,
    pub sa_o: Linear<T>,
    pub ca_norm: LayerNorm<T>,
    pub mpa: MpaLayerWeights<T>,
    pub ffn_norm: LayerNorm<T>,
    pub ffn: Mlp<T>,
}

impl<T: Scalar> DecoderLayerWeights<T> {
    pub fn random(cfg: &AttentionConfig, rng: &mut XorShift64Star) -> Self {
        let d = cfg.d;
        let eps = T::lit(DECODER_NORM_EPS);
        Self {
            sa_norm: LayerNorm::identity(d, eps),
            sa_q: Linear::random(d, d, true, rng),
            sa_k: Linear::random(d, d, true, rng),
            sa_v: Linear::random(d, d, true, rng),
            sa_o: Linear::random(d, d, true, rng),
            ca_norm: LayerNorm::identity(d, eps),
            mpa: MpaLayerWeights::random(d, cfg.n_p, cfg.n_off, rng),
            ffn_norm: LayerNorm::identity(d, eps),
            ffn: Mlp { hidden: Linear::random(d, cfg.ffn_dim, true, rng), output: Linear::random(cfg.ffn_dim, d, true, rng) },
        }
    }

    fn to_store(&self, s: &mut TensorStore, p: &str) {
        s.put_layer_norm(&format!("{p}.sa_norm"), &self.sa_norm);
        s.put_linear(&format!("{p}.sa_q"), &self.sa_q);
        s.put_linear(&format!("{p}.sa_k"), &self.sa_k);
        s.put_linear(&format!("{p}.sa_v"), &self.sa_v);
        s.put_linear(&format!("{p}.sa_o"), &self.sa_o);
        s.put_layer_norm(&format!("{p}.ca_norm"), &self.ca_norm);
        s.put_linear(&format!("{p}.offset"), &self.mpa.offset);
        s.put_linear(&format!("{p}.weight"), &self.mpa.weight);
        s.put_layer_norm(&format!("{p}.ffn_norm"), &self.ffn_norm);
        s.put_mlp(&format!("{p}.ffn"), &self.ffn);
    }

    fn from_store(s: &TensorStore, p: &str, cfg: &AttentionConfig) -> Result<Self> {
        let d = cfg.d;
        let eps = T::lit(DECODER_NORM_EPS);
        Ok(Self {
            sa_norm: s.layer_norm(&format!("{p}.sa_norm"), d, eps)?,
            sa_q: s.linear(&format!("{p}.sa_q"), d, d, true)?,
            sa_k: s.linear(&format!("{p}.sa_k"), d, d, true)?,
            sa_v: s.linear(&format!("{p}.sa_v"), d, d, true)?,
            sa_o: s.linear(&format!("{p}.sa_o"), d, d, true)?,
            ca_norm: s.layer_norm(&format!("{p}.ca_norm"), d, eps)?,
            mpa: MpaLayerWeights {
                offset: s.linear(&format!("{p}.offset"), d, 2 * cfg.slots(), true)?,
                weight: s.linear(&format!("{p}.weight"), d, cfg.slots(), true)?,
            },
            ffn_norm: s.layer_norm(&format!("{p}.ffn_norm"), d, eps)?,
            ffn: s.mlp(&format!("{p}.ffn"), d, cfg.ffn_dim, d)?,
        })
    }
}

/// Full decoder parameters, including the learned initial queries.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderWeights<T> {
    pub cfg: AttentionConfig,
    /// `C → D`, no bias.
    pub value_proj: Linear<T>,
    pub layers: Vec<DecoderLayerWeights<T>>,
    /// Shared across layers, `D → 2·n_p`.
    pub reg: Mlp<T>,
    /// `D → 3`
    pub cls: Linear<T>,
    pub query_embed: Vec<Vec<T>>,
    pub init_points: Vec<Vec<Point2<T>>>,
}

impl<T: Scalar> DecoderWeights<T> {
    pub fn random(cfg: &AttentionConfig, rng: &mut XorShift64Star) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d;
        let value_proj = Linear::random(cfg.bev_channels, d, false, rng);
        let layers = (0..cfg.layers).map(|_| DecoderLayerWeights::random(cfg, rng)).collect();
        let reg = Mlp { hidden: Linear::random(d, d, true, rng), output: Linear::random(d, 2 * cfg.n_p, true, rng) };
        let cls = Linear::random(d, 3, true, rng);
        let query_embed = (0..cfg.n_q).map(|_| (0..d).map(|_| T::lit(rng.uniform(-1.0, 1.0))).collect()).collect();
        let init_points = (0..cfg.n_q)
            .map(|_| {
                (0..cfg.n_p)
                    .map(|_| Point2::new(T::lit(rng.uniform(0.02, 0.98)), T::lit(rng.uniform(0.02, 0.98))))
                    .collect()
            })
            .collect();
        Ok(Self { cfg: *cfg, value_proj, layers, reg, cls, query_embed, init_points })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = &self.cfg;
        cfg.validate()?;
        let bad = |what: &str| Err(Error::ShapeMismatch(format!("decoder {what} does not match the configuration")));
        if self.value_proj.in_dim != cfg.bev_channels || self.value_proj.out_dim != cfg.d {
            return bad("value projection");
        }
        if self.layers.len() != cfg.layers {
            return bad("layer count");
        }
        if self.reg.in_dim() != cfg.d || self.reg.out_dim() != 2 * cfg.n_p || self.cls.in_dim != cfg.d || self.cls.out_dim != 3 {
            return bad("heads");
        }
        for l in &self.layers {
            if l.mpa.slots() != cfg.slots() || l.mpa.offset.out_dim != 2 * cfg.slots() || l.sa_q.in_dim != cfg.d {
                return bad("layer");
            }
        }
        if self.query_embed.len() != cfg.n_q || self.query_embed.iter().any(|e| e.len() != cfg.d) {
            return bad("query embeddings");
        }
        if self.init_points.len() != cfg.n_q || self.init_points.iter().any(|p| p.len() != cfg.n_p) {
            return bad("initial polylines");
        }
        Ok(())
    }

    pub fn to_store(&self, s: &mut TensorStore, p: &str) {
        let cfg = &self.cfg;
        s.put_linear(&format!("{p}.value_proj"), &self.value_proj);
        for (i, l) in self.layers.iter().enumerate() {
            l.to_store(s, &format!("{p}.layers.{i}"));
        }
        s.put_mlp(&format!("{p}.reg"), &self.reg);
        s.put_linear(&format!("{p}.cls"), &self.cls);
        let embed: Vec<T> = self.query_embed.concat();
        s.put(format!("{p}.query_embed"), vec![cfg.n_q, cfg.d], &embed);
        let pts: Vec<T> = self.init_points.iter().flatten().flat_map(|q| [q.x, q.y]).collect();
        s.put(format!("{p}.init_points"), vec![cfg.n_q, cfg.n_p, 2], &pts);
    }

    pub fn from_store(s: &TensorStore, p: &str, cfg: &AttentionConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d;
        let layers =
            (0..cfg.layers).map(|i| DecoderLayerWeights::from_store(s, &format!("{p}.layers.{i}"), cfg)).collect::<Result<_>>()?;
        let embed: Vec<T> = s.get_as(&format!("{p}.query_embed"), &[cfg.n_q, d])?;
        let pts: Vec<T> = s.get_as(&format!("{p}.init_points"), &[cfg.n_q, cfg.n_p, 2])?;
        let w = Self {
            cfg: *cfg,
            value_proj: s.linear(&format!("{p}.value_proj"), cfg.bev_channels, d, false)?,
            layers,
            reg: s.mlp(&format!("{p}.reg"), d, d, 2 * cfg.n_p)?,
            cls: s.linear(&format!("{p}.cls"), d, 3, true)?,
            query_embed: embed.chunks_exact(d).map(<[T]>::to_vec).collect(),
            init_points: pts
                .chunks_exact(2 * cfg.n_p)
                .map(|q| q.chunks_exact(2).map(|c| Point2::new(c[0], c[1])).collect())
                .collect(),
        };
        w.validate()?;
        Ok(w)
    }

    /// The learned initial queries, score 0.
    pub fn fresh_queries(&self) -> Vec<QueryState<T>> {
        self.query_embed
            .iter()
            .zip(&self.init_points)
            .map(|(e, p)| QueryState { embedding: e.clone(), score: T::zero(), points: p.clone(), origin: QueryOrigin::Fresh })
            .collect()
    }

    /// Per-class probabilities.
    pub fn class_probs(&self, q: &[T]) -> [T; 3] {
        let l = self.cls.forward(q);
        [sigmoid(l[0]), sigmoid(l[1]), sigmoid(l[2])]
    }
}

fn self_attention<T: Scalar>(qs: &mut [QueryState<T>], l: &DecoderLayerWeights<T>) {
    let normed: Vec<Vec<T>> = qs.par_iter().map(|q| l.sa_norm.apply(&q.embedding)).collect();
    let keys: Vec<Vec<T>> = normed.par_iter().map(|x| l.sa_k.forward(x)).collect();
    let values: Vec<Vec<T>> = normed.par_iter().map(|x| l.sa_v.forward(x)).collect();
    let scale = T::one() / T::from_usize_lossy(l.sa_q.out_dim).sqrt();
    qs.par_iter_mut().zip(normed.par_iter()).for_each(|(q, x)| {
        let query = l.sa_q.forward(x);
        let logits: Vec<T> =
            keys.iter().map(|k| k.iter().zip(&query).map(|(a, b)| *a * *b).sum::<T>() * scale).collect();
        let attn = softmax(&logits);
        let mut mixed = vec![T::zero(); query.len()];
        for (a, v) in attn.iter().zip(&values) {
            for (m, x) in mixed.iter_mut().zip(v) {
                *m += *a * *x;
            }
        }
        for (e, o) in q.embedding.iter_mut().zip(l.sa_o.forward(&mixed)) {
            *e += o;
        }
    });
}

/// Runs decoder layers `layers` over `queries`, refining embeddings,
/// polylines and scores in place.
pub fn run_layers<T: Scalar>(
    queries: &mut [QueryState<T>],
    sampler: &Sampler<'_, T>,
    w: &DecoderWeights<T>,
    layers: Range<usize>,
) -> Result<()> {
    let d = w.cfg.d;
    if let Some(q) = queries.iter().find(|q| q.embedding.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: q.embedding.len() });
    }
    if let Some(q) = queries.iter().find(|q| q.points.len() != w.cfg.n_p) {
        return Err(Error::PointCountMismatch { left: q.points.len(), right: w.cfg.n_p });
    }
    for li in layers {
        let l = w.layers.get(li).ok_or_else(|| Error::InvalidArgument(format!("decoder has no layer {li}")))?;
        self_attention(queries, l);
        queries.par_iter_mut().try_for_each(|q| -> Result<()> {
            let x = l.ca_norm.apply(&q.embedding);
            let mut e = mpa_attend(&x, &q.points, sampler, &l.mpa)?;
            let ffn = l.ffn.forward(&l.ffn_norm.apply(&e));
            for (a, b) in e.iter_mut().zip(ffn) {
                *a += b;
            }
            q.points = regress_points(&e, &w.reg)?;
            let probs = w.class_probs(&e);
            q.score = probs.into_iter().fold(T::zero(), T::max);
            q.embedding = e;
            Ok(())
        })?;
    }
    Ok(())
}

/// Metric map element for a refined query: most probable class, its
/// probability as confidence, polyline in ego coordinates.
pub fn query_to_instance<T: Scalar>(q: &QueryState<T>, w: &DecoderWeights<T>, range: &PerceptionRange<T>) -> Result<MapInstance<T>> {
    let probs = w.class_probs(&q.embedding);
    let mut best = 0;
    for c in 1..3 {
        if probs[c] > probs[best] {
            best = c;
        }
    }
    let class = ClassId::from_index(best).expect("three classes");
    let pts = q.points.iter().map(|p| range.denormalize_point(*p)).collect();
    MapInstance::new(class, Polyline::new(pts, class.natural_kind())?, probs[best])
}

#[derive(Debug, Clone)]
pub struct DecodeOutput<T> {
    /// One element per query whose polyline is non-degenerate.
    pub instances: Vec<MapInstance<T>>,
    pub queries: Vec<QueryState<T>>,
    /// Feature locations read across all layers.
    pub sample_sites: usize,
}

/// Runs the full decoder stack and emits metric map elements.
pub fn decode<T: Scalar>(queries: &[QueryState<T>], f: &BevGrid<T>, w: &DecoderWeights<T>) -> Result<DecodeOutput<T>> {
    w.validate()?;
    if queries.len() != w.cfg.n_q {
        return Err(Error::InvalidArgument(format!("decoder expects {} queries, got {}", w.cfg.n_q, queries.len())));
    }
    let sampler = Sampler::new(f, &w.value_proj)?;
    let mut qs = queries.to_vec();
    run_layers(&mut qs, &sampler, w, 0..w.cfg.layers)?;
    finish(qs, w, f.range(), sampler.sites())
}

pub(crate) fn finish<T: Scalar>(
    queries: Vec<QueryState<T>>,
    w: &DecoderWeights<T>,
    range: &PerceptionRange<T>,
    sample_sites: usize,
) -> Result<DecodeOutput<T>> {
    let instances = queries.iter().filter_map(|q| query_to_instance(q, w, range).ok()).collect();
    Ok(DecodeOutput { instances, queries, sample_sites })
}
