use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use vecmap::map_model::{clip_to_range, ClassId, LocalMap, MapInstance, Polyline};
use vecmap::matching::{hungarian, match_cost_matrix, training_loss, CostWeights, LossBreakdown, Prediction};
use vecmap::{inverse_sigmoid, Error};

#[derive(clap::Args)]
pub struct Args {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Points per polyline after resampling.
    #[arg(long = "np", default_value_t = 20)]
    n_p: usize,
    #[arg(long, default_value_t = 50.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda2: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda3: f64,
    /// Include the full cost matrix of every frame.
    #[arg(long)]
    debug: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Header {
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    n_p: usize,
}

#[derive(Serialize)]
struct FrameDump {
    frame_id: String,
    n_pred: usize,
    n_gt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    cost: Option<Vec<Vec<f64>>>,
    pairs: Vec<(usize, usize)>,
    unmatched_preds: Vec<usize>,
    total_cost: f64,
    loss: LossBreakdown<f64>,
}

/// Unit-square polylines with `n_p` points, after clipping to the frame's range.
fn normalized(m: &LocalMap<f64>, n_p: usize) -> Result<Vec<(MapInstance<f64>, Polyline<f64>)>> {
    let mut out = Vec::new();
    for inst in m.instances.iter().flat_map(|i| clip_to_range(i, &m.range)) {
        let p = m.range.normalize(&inst.polyline).resample(n_p)?;
        out.push((inst, p));
    }
    Ok(out)
}

/// Map files carry a class and a confidence rather than logits: the labeled
/// class gets logit(confidence), the others a near-zero probability.
fn prediction(inst: &MapInstance<f64>, p: Polyline<f64>) -> Prediction<f64> {
    let mut logits = [inverse_sigmoid(0.0); ClassId::COUNT];
    logits[inst.class.index()] = inverse_sigmoid(inst.confidence());
    Prediction { logits, polyline: p }
}

pub fn run(a: Args) -> Result<()> {
    let w = CostWeights { lambda1: a.lambda1, lambda2: a.lambda2, lambda3: a.lambda3, ..CostWeights::default() };
    w.validate()?;
    let preds = crate::eval::load(&a.pred)?;
    let gts = crate::eval::load(&a.gt)?;
    let by_id: HashMap<&str, &LocalMap<f64>> = preds.iter().map(|m| (m.frame_id.as_str(), m)).collect();
    let gt_ids: std::collections::HashSet<&str> = gts.iter().map(|m| m.frame_id.as_str()).collect();
    let mut missing: Vec<String> =
        gts.iter().filter(|g| !by_id.contains_key(g.frame_id.as_str())).map(|g| g.frame_id.clone()).collect();
    missing.extend(preds.iter().filter(|p| !gt_ids.contains(p.frame_id.as_str())).map(|p| p.frame_id.clone()));
    if !missing.is_empty() {
        return Err(Error::FrameMismatch { missing }.into());
    }

    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout().lock()),
    };
    let header = Header { lambda1: w.lambda1, lambda2: w.lambda2, lambda3: w.lambda3, n_p: a.n_p };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    for gt in &gts {
        let p: Vec<Prediction<f64>> =
            normalized(by_id[gt.frame_id.as_str()], a.n_p)?.into_iter().map(|(i, p)| prediction(&i, p)).collect();
        let g: Vec<MapInstance<f64>> = normalized(gt, a.n_p)?.into_iter().map(|(i, p)| i.with_polyline(p)).collect();
        let costs = match_cost_matrix(&p, &g, &w)?;
        let assignment = hungarian(&costs)?;
        let loss = training_loss(&p, &g, &assignment, &w, &[])?;
        let dump = FrameDump {
            frame_id: gt.frame_id.clone(),
            n_pred: p.len(),
            n_gt: g.len(),
            cost: a.debug.then(|| (0..costs.rows()).map(|r| costs.row(r).to_vec()).collect()),
            total_cost: assignment.total_cost(&costs),
            pairs: assignment.pairs,
            unmatched_preds: assignment.unmatched_preds,
            loss,
        };
        writeln!(out, "{}", serde_json::to_string(&dump)?)?;
    }
    out.flush()?;
    Ok(())
}
