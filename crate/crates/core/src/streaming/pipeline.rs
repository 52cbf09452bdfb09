use super::bev::BevGrid;
use super::gru::{gru_fuse, GruWeights};
use super::propagation::{select_and_merge, transform_queries, QueryState, TransformMlpWeights};
use super::warp::warp_bev;
use crate::attention::{finish, regress_points, run_layers, AttentionConfig, DecodeOutput, DecoderWeights, Sampler};
use crate::error::{Error, Result};
use crate::map_model::{MapInstance, Polyline, PolylineKind, RigidTransform};
use crate::rng::XorShift64Star;
use crate::scalar::Scalar;
use crate::tensor_store::TensorStore;

/// Queries carried to the next frame.
pub const DEFAULT_PROPAGATED: usize = 33;

/// Everything `step` needs besides the frame itself.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamParams<T> {
    pub decoder: DecoderWeights<T>,
    pub gru: GruWeights<T>,
    pub transform: TransformMlpWeights<T>,
    /// Number of queries propagated between frames.
    pub k: usize,
}

impl<T: Scalar> StreamParams<T> {
    pub fn random(cfg: &AttentionConfig, k: usize, seed: u64) -> Result<Self> {
        let mut rng = XorShift64Star::new(seed);
        let decoder = DecoderWeights::random(cfg, &mut rng)?;
        let gru = GruWeights::random(cfg.bev_channels, &mut rng);
        let transform = TransformMlpWeights::random(cfg.d, &mut rng);
        let p = Self { decoder, gru, transform, k };
        p.validate()?;
        Ok(p)
    }

    pub fn cfg(&self) -> &AttentionConfig {
        &self.decoder.cfg
    }

    pub fn validate(&self) -> Result<()> {
        self.decoder.validate()?;
        let cfg = self.cfg();
        if self.k > cfg.n_q {
            return Err(Error::InvalidArgument(format!("cannot propagate {} of {} queries", self.k, cfg.n_q)));
        }
        self.gru.validate(cfg.bev_channels)?;
        if self.transform.dim() != cfg.d {
            return Err(Error::DimensionMismatch { expected: cfg.d, got: self.transform.dim() });
        }
        Ok(())
    }

    pub fn to_store(&self) -> TensorStore {
        let mut s = TensorStore::new();
        self.decoder.to_store(&mut s, "decoder");
        self.gru.to_store(&mut s, "gru");
        self.transform.to_store(&mut s, "transform");
        s
    }

    pub fn from_store(store: &TensorStore, cfg: &AttentionConfig, k: usize) -> Result<Self> {
        let p = Self {
            decoder: DecoderWeights::from_store(store, "decoder", cfg)?,
            gru: GruWeights::from_store(store, "gru", cfg.bev_channels)?,
            transform: TransformMlpWeights::from_store(store, "transform", cfg.d)?,
            k,
        };
        p.validate()?;
        Ok(p)
    }
}

/// State carried between frames: one fused raster and the top-`k` queries.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory<T> {
    pub bev: BevGrid<T>,
    pub queries: Vec<QueryState<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct MemoryStats {
    pub bev_grids: usize,
    pub bev_values: usize,
    pub queries: usize,
    /// Scalars held: raster values plus query embeddings, scores and points.
    pub scalars: usize,
}

impl<T: Scalar> Memory<T> {
    pub fn stats(&self) -> MemoryStats {
        let q: usize = self.queries.iter().map(|q| q.embedding.len() + 1 + 2 * q.points.len()).sum();
        MemoryStats { bev_grids: 1, bev_values: self.bev.data().len(), queries: self.queries.len(), scalars: self.bev.data().len() + q }
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput<T> {
    pub instances: Vec<MapInstance<T>>,
    /// All refined queries, propagated ones first.
    pub queries: Vec<QueryState<T>>,
    /// `(regressed, re-expressed)` unit-square polylines of the propagated
    /// queries, the inputs of the auxiliary transformation loss.
    pub transform_targets: Vec<(Polyline<T>, Polyline<T>)>,
    pub sample_sites: usize,
}

fn top_k<T: Scalar>(qs: &[QueryState<T>], k: usize) -> Vec<QueryState<T>> {
    let mut idx: Vec<usize> = (0..qs.len()).collect();
    idx.sort_by(|&a, &b| qs[b].score.partial_cmp(&qs[a].score).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.into_iter().take(k).map(|i| qs[i].clone()).collect()
}

/// Processes one frame.
///
/// With memory, the stored raster is warped into the current frame and fused
/// with `bev`; the stored queries are carried over by `t` and merged with the
/// best fresh queries after the first decoder layer; the remaining layers
/// then refine the merged set. Without memory this is a plain decode.
pub fn step<T: Scalar>(
    memory: Option<&Memory<T>>,
    bev: &BevGrid<T>,
    t: &RigidTransform<T>,
    params: &StreamParams<T>,
) -> Result<(FrameOutput<T>, Memory<T>)> {
    params.validate()?;
    let w = &params.decoder;
    let cfg = w.cfg;
    let mut transform_targets = Vec::new();
    let (fused, decoded): (BevGrid<T>, DecodeOutput<T>) = match memory {
        None => {
            let out = crate::attention::decode(&w.fresh_queries(), bev, w)?;
            (bev.clone(), out)
        }
        Some(mem) => {
            let fused = gru_fuse(&warp_bev(&mem.bev, t), bev, &params.gru)?;
            let sampler = Sampler::new(&fused, &w.value_proj)?;
            let mut fresh = w.fresh_queries();
            run_layers(&mut fresh, &sampler, w, 0..1)?;
            let carried = transform_queries(&mem.queries, t, &params.transform, fused.range())?;
            for q in &carried {
                let pred = regress_points(&q.embedding, &w.reg)?;
                if let (Ok(a), Ok(b)) = (Polyline::new(pred, PolylineKind::Open), Polyline::new(q.points.clone(), PolylineKind::Open)) {
                    transform_targets.push((a, b));
                }
            }
            let mut merged = select_and_merge(&carried, &fresh, params.k, cfg.n_q)?;
            run_layers(&mut merged, &sampler, w, 1..cfg.layers)?;
            let sites = sampler.sites();
            let out = finish(merged, w, fused.range(), sites)?;
            (fused, out)
        }
    };
    let next = Memory { bev: fused, queries: top_k(&decoded.queries, params.k) };
    Ok((
        FrameOutput {
            instances: decoded.instances,
            queries: decoded.queries,
            transform_targets,
            sample_sites: decoded.sample_sites,
        },
        next,
    ))
}

/// Drives `step` over a sequence given absolute ego poses.
#[derive(Debug)]
pub struct Stream<'p, T> {
    params: &'p StreamParams<T>,
    memory: Option<Memory<T>>,
    last_pose: Option<RigidTransform<T>>,
}

impl<'p, T: Scalar> Stream<'p, T> {
    pub fn new(params: &'p StreamParams<T>) -> Self {
        Self { params, memory: None, last_pose: None }
    }

    pub fn memory(&self) -> Option<&Memory<T>> {
        self.memory.as_ref()
    }

    pub fn reset(&mut self) {
        self.memory = None;
        self.last_pose = None;
    }

    /// `pose` is ego→world for this frame.
    pub fn push(&mut self, bev: &BevGrid<T>, pose: &RigidTransform<T>) -> Result<FrameOutput<T>> {
        let t = match &self.last_pose {
            Some(prev) => RigidTransform::relative(prev, pose),
            None => RigidTransform::identity(),
        };
        let (out, mem) = step(self.memory.as_ref(), bev, &t, self.params)?;
        self.memory = Some(mem);
        self.last_pose = Some(*pose);
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::PerceptionRange;

    fn cfg() -> AttentionConfig {
        AttentionConfig { n_q: 10, n_p: 4, n_off: 1, d: 8, layers: 3, ffn_dim: 8, bev_channels: 4 }
    }

    fn bev(seed: u64) -> BevGrid<f64> {
        let mut rng = XorShift64Star::new(seed);
        BevGrid::from_fn(8, 6, 4, PerceptionRange::new(30.0, 15.0).unwrap(), |_, _, _| rng.uniform(-1.0, 1.0))
    }

    #[test]
    fn first_frame_is_plain_decode() {
        let p = StreamParams::<f64>::random(&cfg(), 3, 11).unwrap();
        let f = bev(1);
        let (out, mem) = step(None, &f, &RigidTransform::identity(), &p).unwrap();
        let plain = crate::attention::decode(&p.decoder.fresh_queries(), &f, &p.decoder).unwrap();
        assert_eq!(out.queries, plain.queries);
        assert_eq!(out.instances, plain.instances);
        assert_eq!(mem.queries.len(), 3);
        assert!(out.transform_targets.is_empty());
    }

    #[test]
    fn memory_is_bounded_and_queries_mixed() {
        let p = StreamParams::<f64>::random(&cfg(), 3, 12).unwrap();
        let mut s = Stream::new(&p);
        let mut stats = Vec::new();
        for i in 0..5 {
            let pose = RigidTransform::from_yaw_translation(0.05 * i as f64, 2.0 * i as f64, 0.0);
            let out = s.push(&bev(i), &pose).unwrap();
            assert_eq!(out.queries.len(), 10);
            if i > 0 {
                let carried = out.queries.iter().filter(|q| q.origin == super::super::QueryOrigin::Propagated).count();
                assert_eq!(carried, 3);
                assert_eq!(out.transform_targets.len(), 3);
            }
            stats.push(s.memory().unwrap().stats());
        }
        assert!(stats.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn params_store_roundtrip() {
        let p = StreamParams::<f32>::random(&cfg(), 3, 13).unwrap();
        let back = StreamParams::<f32>::from_store(&p.to_store(), &cfg(), 3).unwrap();
        assert_eq!(back, p);
    }
}
