use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use vecmap::attention::AttentionConfig;
use vecmap::streaming::{StreamParams, DEFAULT_PROPAGATED};
use vecmap::tensor_store::TensorStore;

/// Model shape flags shared by `weights` and `stream --seed`.
#[derive(clap::Args, Clone)]
pub struct Shape {
    #[arg(long = "nq", default_value_t = 100)]
    pub n_q: usize,
    #[arg(long = "np", default_value_t = 20)]
    pub n_p: usize,
    #[arg(long = "noff", default_value_t = 1)]
    pub n_off: usize,
    /// Query embedding width.
    #[arg(long, default_value_t = 256)]
    pub d: usize,
    #[arg(long, default_value_t = 6)]
    pub layers: usize,
    #[arg(long, default_value_t = 512)]
    pub ffn: usize,
    /// Propagated queries per frame.
    #[arg(long, default_value_t = DEFAULT_PROPAGATED)]
    pub k: usize,
}

impl Shape {
    pub fn config(&self, bev_channels: usize) -> AttentionConfig {
        AttentionConfig { n_q: self.n_q, n_p: self.n_p, n_off: self.n_off, d: self.d, layers: self.layers, ffn_dim: self.ffn, bev_channels }
    }
}

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    seed: u64,
    /// BEV channel count the weights will consume.
    #[arg(long, default_value_t = 256)]
    bev_channels: usize,
    #[command(flatten)]
    shape: Shape,
    /// Manifest path; the blob is written next to it as `<stem>.bin`.
    #[arg(long)]
    out: PathBuf,
}

/// Seeded weights, rounded to the stored `f32` precision so that `--seed`
/// and a file written by `weights` with the same seed behave identically.
pub fn seeded(cfg: &AttentionConfig, k: usize, seed: u64) -> Result<StreamParams<f64>> {
    let p = StreamParams::<f64>::random(cfg, k, seed)?;
    Ok(StreamParams::from_store(&p.to_store(), cfg, k)?)
}

fn dims(store: &TensorStore, name: &str) -> Result<Vec<usize>> {
    Ok(store.get(name)?.shape.clone())
}

/// Recovers the decoder shape from tensor shapes.
pub fn infer_config(store: &TensorStore) -> Result<AttentionConfig> {
    let embed = dims(store, "decoder.query_embed")?;
    let pts = dims(store, "decoder.init_points")?;
    let value = dims(store, "decoder.value_proj.weight")?;
    let weight = dims(store, "decoder.layers.0.weight.weight")?;
    let ffn = dims(store, "decoder.layers.0.ffn.hidden.weight")?;
    let layers = (0..).take_while(|i| store.get(&format!("decoder.layers.{i}.sa_q.weight")).is_ok()).count();
    let (n_q, d, n_p) = (embed[0], embed[1], pts[1]);
    if pts.len() != 3 || value.len() != 2 || weight[0] % n_p != 0 {
        bail!("weight shapes do not describe a decoder");
    }
    let cfg = AttentionConfig { n_q, n_p, n_off: weight[0] / n_p, d, layers, ffn_dim: ffn[0], bev_channels: value[1] };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &PathBuf, k: usize) -> Result<(StreamParams<f64>, Option<u64>)> {
    let store = TensorStore::load(path).with_context(|| format!("reading weights {}", path.display()))?;
    let cfg = infer_config(&store)?;
    Ok((StreamParams::from_store(&store, &cfg, k)?, store.seed))
}

pub fn save(params: &StreamParams<f64>, seed: Option<u64>, path: &PathBuf) -> Result<()> {
    let mut store = params.to_store();
    store.seed = seed;
    store.save(path).with_context(|| format!("writing weights {}", path.display()))?;
    Ok(())
}

pub fn run(a: Args) -> Result<()> {
    let params = seeded(&a.shape.config(a.bev_channels), a.shape.k, a.seed)?;
    save(&params, Some(a.seed), &a.out)
}
