use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vecmap::geosplit::{
    coverage, load_manifest, overlap, propose_split, render_split, save_pgm, CoverageRaster, OverlapReport, SplitParams,
    Trajectory, DEFAULT_RADIUS, DEFAULT_RESOLUTION,
};

use crate::Misaligned;

#[derive(clap::Args)]
pub struct SplitArgs {
    /// Scene manifest, one `{scene_id, city, attributes, poses}` per line.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    n_train: usize,
    #[arg(long)]
    n_val: usize,
    /// Coverage radius around each pose, meters.
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    /// Raster cell size, meters.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Attribute keys whose train/val distributions are reported and used as a tie-break.
    #[arg(long, value_delimiter = ',')]
    balance: Vec<String>,
    /// Random splits tried as a baseline.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long)]
    out: PathBuf,
    /// Write one `<city>.pgm` coverage image per city here.
    #[arg(long)]
    pgm_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
pub struct AuditArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Split file with `train` and `val` scene id lists.
    #[arg(long)]
    split: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RADIUS)]
    radius: f64,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    resolution: f64,
    /// Report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    pgm_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
struct SplitFile {
    train: Vec<String>,
    val: Vec<String>,
}

#[derive(Serialize)]
struct AuditReport {
    radius: f64,
    resolution: f64,
    train_scenes: usize,
    val_scenes: usize,
    #[serde(flatten)]
    overlap: OverlapReport,
}

fn manifest(path: &Path) -> Result<Vec<Trajectory>> {
    load_manifest(path).with_context(|| format!("reading {}", path.display()))
}

fn write_images(dir: &Path, train: &[CoverageRaster], val: &[CoverageRaster]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut cities: BTreeMap<&str, (Option<&CoverageRaster>, Option<&CoverageRaster>)> = BTreeMap::new();
    for r in train {
        cities.entry(&r.city).or_default().0 = Some(r);
    }
    for r in val {
        cities.entry(&r.city).or_default().1 = Some(r);
    }
    for (city, (t, v)) in cities {
        let (w, h, px) = render_split(t, v);
        save_pgm(dir.join(format!("{city}.pgm")), w, h, &px)?;
    }
    Ok(())
}

fn pick<'a>(all: &HashMap<&str, &'a Trajectory>, ids: &[String]) -> Result<Vec<Trajectory>> {
    ids.iter()
        .map(|id| all.get(id.as_str()).map(|t| (*t).clone()).ok_or_else(|| Misaligned(format!("unknown scene `{id}`")).into()))
        .collect()
}

pub fn run_split(a: SplitArgs) -> Result<()> {
    let trajs = manifest(&a.manifest)?;
    let params = SplitParams {
        radius: a.radius,
        resolution: a.resolution,
        seed: a.seed,
        balance_keys: a.balance,
        random_trials: a.trials,
        ..SplitParams::new(a.n_train, a.n_val)
    };
    let result = propose_split(&trajs, &params)?;
    log::info!("split: seed {}, overlap ratio {:.4} via {}", a.seed, result.report.overlap_ratio, result.report.method);
    std::fs::write(&a.out, serde_json::to_string_pretty(&result)?).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(dir) = &a.pgm_dir {
        let all: HashMap<&str, &Trajectory> = trajs.iter().map(|t| (t.scene_id.as_str(), t)).collect();
        let train = coverage(&pick(&all, &result.train)?, a.radius, a.resolution)?;
        let val = coverage(&pick(&all, &result.val)?, a.radius, a.resolution)?;
        write_images(dir, &train, &val)?;
    }
    Ok(())
}

pub fn run_audit(a: AuditArgs) -> Result<()> {
    let trajs = manifest(&a.manifest)?;
    let text = std::fs::read_to_string(&a.split).with_context(|| format!("reading {}", a.split.display()))?;
    let split: SplitFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.split.display()))?;
    let all: HashMap<&str, &Trajectory> = trajs.iter().map(|t| (t.scene_id.as_str(), t)).collect();
    let train = coverage(&pick(&all, &split.train)?, a.radius, a.resolution)?;
    let val = coverage(&pick(&all, &split.val)?, a.radius, a.resolution)?;
    let report = AuditReport {
        radius: a.radius,
        resolution: a.resolution,
        train_scenes: split.train.len(),
        val_scenes: split.val.len(),
        overlap: overlap(&train, &val)?,
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &a.out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => println!("{text}"),
    }
    if let Some(dir) = &a.pgm_dir {
        write_images(dir, &train, &val)?;
    }
    Ok(())
}
