use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ap::{average_precision, match_frame, rank, Detection, FrameMatches};
use crate::error::{Error, Result};
use crate::map_model::{clip_to_range, ClassId, LocalMap, MapInstance, PerceptionRange, RangePreset};
use crate::scalar::Scalar;

/// Evaluation window, Chamfer thresholds and densification pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig<T = f64> {
    pub range: PerceptionRange<T>,
    /// Strictly increasing, meters.
    pub thresholds: Vec<T>,
    /// Chamfer densification pitch, meters.
    pub sample_spacing: T,
}

pub const DEFAULT_SAMPLE_SPACING: f64 = 0.1;

impl<T: Scalar> EvalConfig<T> {
    pub fn preset(p: RangePreset) -> Self {
        Self {
            range: PerceptionRange::preset(p),
            thresholds: p.thresholds().iter().map(|t| T::lit(*t)).collect(),
            sample_spacing: T::lit(DEFAULT_SAMPLE_SPACING),
        }
    }

    pub fn new(range: PerceptionRange<T>, thresholds: Vec<T>, sample_spacing: T) -> Result<Self> {
        if thresholds.is_empty() || thresholds.iter().any(|t| !(*t > T::zero())) {
            return Err(Error::InvalidArgument("thresholds must be positive and non-empty".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("thresholds must be strictly increasing".into()));
        }
        if !(sample_spacing > T::zero()) {
            return Err(Error::InvalidArgument("sample spacing must be positive".into()));
        }
        Ok(Self { range, thresholds, sample_spacing })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub n_pred: usize,
    pub n_gt: usize,
    pub n_tp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: ClassId,
    /// AP at each threshold, in threshold order.
    pub ap: Vec<f64>,
    /// AP averaged over thresholds; `None` when the class has neither
    /// predictions nor ground truth anywhere.
    pub mean_ap: Option<f64>,
    pub counts: Vec<Counts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub range: [f64; 2],
    pub thresholds: Vec<f64>,
    pub sample_spacing: f64,
    pub n_frames: usize,
    pub classes: Vec<ClassReport>,
    /// Mean of the per-class averaged APs over the classes that are present.
    pub map: f64,
}

impl EvalReport {
    pub fn class(&self, c: ClassId) -> &ClassReport {
        &self.classes[c.index()]
    }

    /// Aligned text table, columns AP_ped, AP_div, AP_bound, mAP.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "range {}x{} m, thresholds {} m, {} frames\n",
            self.range[0] * 2.0,
            self.range[1] * 2.0,
            self.thresholds.iter().map(|t| format!("{t}")).collect::<Vec<_>>().join("/"),
            self.n_frames
        );
        s.push_str(&format!("{:<10}{:>9}{:>9}{:>10}{:>9}\n", "", "AP_ped", "AP_div", "AP_bound", "mAP"));
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        for (t, thr) in self.thresholds.iter().enumerate() {
            let vals: Vec<Option<f64>> = self.classes.iter().map(|c| c.mean_ap.map(|_| c.ap[t])).collect();
            let present: Vec<f64> = vals.iter().flatten().copied().collect();
            let mean = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
            s.push_str(&format!(
                "{:<10}{:>9}{:>9}{:>10}{:>9}\n",
                format!("@{thr}m"),
                cell(vals[0]),
                cell(vals[1]),
                cell(vals[2]),
                cell(mean)
            ));
        }
        s.push_str(&format!(
            "{:<10}{:>9}{:>9}{:>10}{:>9}\n",
            "mean",
            cell(self.classes[0].mean_ap),
            cell(self.classes[1].mean_ap),
            cell(self.classes[2].mean_ap),
            cell(Some(self.map))
        ));
        s
    }
}

fn clip_all<T: Scalar>(insts: &[MapInstance<T>], r: &PerceptionRange<T>) -> Vec<MapInstance<T>> {
    insts.iter().flat_map(|i| clip_to_range(i, r)).collect()
}

/// Dataset-level AP: matching stays within each frame, precision–recall
/// curves pool all frames per class and threshold.
///
/// Both sides are clipped to the evaluation window first. Frames are paired
/// by `frame_id`; every id present on only one side is reported.
pub fn evaluate<T: Scalar>(pred_maps: &[LocalMap<T>], gt_maps: &[LocalMap<T>], cfg: &EvalConfig<T>) -> Result<EvalReport> {
    let preds_by_id: HashMap<&str, &LocalMap<T>> = pred_maps.iter().map(|m| (m.frame_id.as_str(), m)).collect();
    let gt_ids: std::collections::HashSet<&str> = gt_maps.iter().map(|m| m.frame_id.as_str()).collect();
    let mut missing: Vec<String> = gt_maps
        .iter()
        .filter(|g| !preds_by_id.contains_key(g.frame_id.as_str()))
        .map(|g| g.frame_id.clone())
        .collect();
    missing.extend(pred_maps.iter().filter(|p| !gt_ids.contains(p.frame_id.as_str())).map(|p| p.frame_id.clone()));
    if !missing.is_empty() {
        return Err(Error::FrameMismatch { missing });
    }

    // per frame: one FrameMatches per class
    let per_frame: Vec<Vec<FrameMatches<T>>> = gt_maps
        .par_iter()
        .map(|gt| {
            let pred = preds_by_id[gt.frame_id.as_str()];
            let p = clip_all(&pred.instances, &cfg.range);
            let g = clip_all(&gt.instances, &cfg.range);
            ClassId::ALL
                .iter()
                .map(|&c| match_frame(&p, &g, c, &cfg.thresholds, cfg.sample_spacing))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut classes = Vec::with_capacity(ClassId::COUNT);
    for c in ClassId::ALL {
        let n_gt: usize = per_frame.iter().map(|f| f[c.index()].n_gt).sum();
        let n_pred: usize = per_frame.iter().map(|f| f[c.index()].n_pred).sum();
        let mut ap = Vec::with_capacity(cfg.thresholds.len());
        let mut counts = Vec::with_capacity(cfg.thresholds.len());
        for t in 0..cfg.thresholds.len() {
            let mut pooled: Vec<Detection<T>> =
                per_frame.iter().flat_map(|f| f[c.index()].detections[t].iter().copied()).collect();
            rank(&mut pooled);
            let n_tp = pooled.iter().filter(|d| d.true_positive).count();
            ap.push(average_precision(&pooled, n_gt).to_f64_lossy());
            counts.push(Counts { n_pred, n_gt, n_tp });
        }
        let mean_ap = (n_gt > 0 || n_pred > 0).then(|| ap.iter().sum::<f64>() / ap.len() as f64);
        classes.push(ClassReport { class: c, ap, mean_ap, counts });
    }
    let present: Vec<f64> = classes.iter().filter_map(|c| c.mean_ap).collect();
    let map = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    Ok(EvalReport {
        range: [cfg.range.x_half.to_f64_lossy(), cfg.range.y_half.to_f64_lossy()],
        thresholds: cfg.thresholds.iter().map(|t| t.to_f64_lossy()).collect(),
        sample_spacing: cfg.sample_spacing.to_f64_lossy(),
        n_frames: gt_maps.len(),
        classes,
        map,
    })
}
