use std::path::PathBuf;

use anyhow::{Context, Result};
use vecmap::map_model::{load_maps, LocalMap, PerceptionRange, RangePreset};
use vecmap::metrics::{evaluate, EvalConfig, DEFAULT_SAMPLE_SPACING};

#[derive(clap::Args)]
pub struct Args {
    /// Predicted maps (`.vmap.jsonl`).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth maps (`.vmap.jsonl`).
    #[arg(long)]
    gt: PathBuf,
    /// Perception range in meters along x: 30 or 50.
    #[arg(long, default_value_t = 50)]
    range: u32,
    /// Chamfer thresholds in meters; defaults to the range preset.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Densification pitch for Chamfer distance, meters.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SPACING)]
    spacing: f64,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn config(range: u32, thresholds: Option<Vec<f64>>, spacing: f64) -> Result<EvalConfig<f64>> {
    let preset = RangePreset::from_meters(range).with_context(|| format!("unsupported range {range}; use 30 or 50"))?;
    let thresholds = thresholds.unwrap_or_else(|| preset.thresholds().to_vec());
    Ok(EvalConfig::new(PerceptionRange::preset(preset), thresholds, spacing)?)
}

pub fn load(path: &PathBuf) -> Result<Vec<LocalMap<f64>>> {
    load_maps(path).with_context(|| format!("reading {}", path.display()))
}

pub fn run(a: Args) -> Result<()> {
    let cfg = config(a.range, a.thresholds, a.spacing)?;
    let pred = load(&a.pred)?;
    let gt = load(&a.gt)?;
    let report = evaluate(&pred, &gt, &cfg)?;
    print!("{}", report.to_table());
    if let Some(out) = a.out {
        std::fs::write(&out, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}
