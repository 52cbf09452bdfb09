use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use vecmap::map_model::{save_maps, LocalMap};
use vecmap::streaming::{load_poses, BevGrid, MemoryStats, Stream};

use crate::weights::{self, Shape};
use crate::Misaligned;

#[derive(clap::Args)]
pub struct Args {
    /// Directory holding `<frame_id>.bev.bin` rasters.
    #[arg(long)]
    bev_dir: PathBuf,
    /// Ego poses (`.poses.jsonl`); defines the frame order.
    #[arg(long)]
    poses: PathBuf,
    /// Weight manifest; the model shape is read from it.
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    /// Use seeded weights of the shape given by the shape flags.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    shape: Shape,
    /// Predicted maps, one line per frame.
    #[arg(long)]
    out: PathBuf,
    /// Per-frame memory footprint, one JSON line per frame after a header line.
    #[arg(long)]
    memory_log: Option<PathBuf>,
}

#[derive(Serialize)]
struct LogHeader {
    seed: Option<u64>,
    k: usize,
    config: vecmap::attention::AttentionConfig,
}

#[derive(Serialize)]
struct LogLine<'a> {
    frame_id: &'a str,
    #[serde(flatten)]
    stats: MemoryStats,
    sample_sites: usize,
}

fn load_bev(dir: &std::path::Path, frame_id: &str) -> Result<BevGrid<f64>> {
    let path = dir.join(format!("{frame_id}.bev.bin"));
    if !path.exists() {
        return Err(Misaligned(format!("no raster for frame `{frame_id}` ({})", path.display())).into());
    }
    let grid = BevGrid::<f32>::load(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(grid.cast())
}

pub fn run(a: Args) -> Result<()> {
    let poses = load_poses(&a.poses).with_context(|| format!("reading {}", a.poses.display()))?;
    let Some(first) = poses.first() else { bail!("{} lists no frames", a.poses.display()) };
    let first_bev = load_bev(&a.bev_dir, &first.frame_id)?;
    let (params, seed) = match (&a.weights, a.seed) {
        (Some(p), _) => weights::load(p, a.shape.k)?,
        (None, Some(s)) => (weights::seeded(&a.shape.config(first_bev.channels()), a.shape.k, s)?, Some(s)),
        (None, None) => bail!("pass --weights or --seed"),
    };
    log::info!("stream: {} frames, seed {seed:?}, config {:?}", poses.len(), params.cfg());

    let mut log = match &a.memory_log {
        Some(p) => {
            let mut f = std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?);
            writeln!(f, "{}", serde_json::to_string(&LogHeader { seed, k: params.k, config: *params.cfg() })?)?;
            Some(f)
        }
        None => None,
    };
    let mut stream = Stream::new(&params);
    let mut maps = Vec::with_capacity(poses.len());
    for (n, entry) in poses.iter().enumerate() {
        let bev = if n == 0 { first_bev.clone() } else { load_bev(&a.bev_dir, &entry.frame_id)? };
        let out = stream.push(&bev, &entry.pose).with_context(|| format!("frame `{}`", entry.frame_id))?;
        let mut m = LocalMap::new(entry.frame_id.clone(), entry.timestamp, *bev.range());
        m.ego_pose = entry.pose;
        m.instances = out.instances;
        maps.push(m);
        if let (Some(f), Some(mem)) = (log.as_mut(), stream.memory()) {
            let line = LogLine { frame_id: &entry.frame_id, stats: mem.stats(), sample_sites: out.sample_sites };
            writeln!(f, "{}", serde_json::to_string(&line)?)?;
        }
    }
    if let Some(mut f) = log {
        f.flush()?;
    }
    save_maps(&a.out, &maps).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
