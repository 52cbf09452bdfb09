//! Independent reference implementations used as test oracles. Everything
//! here is written from the documented conventions, not from library code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vecmap::attention::{AttentionConfig, DecoderWeights};
use vecmap::linalg::{LayerNorm, Linear, Mlp};
use vecmap::map_model::{ClassId, MapInstance, Point2, Polyline, PolylineKind};
use vecmap::streaming::BevGrid;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- matching

pub fn huber(d: f64, beta: f64) -> f64 {
    let d = d.abs();
    if d < beta {
        0.5 * d * d / beta
    } else {
        d - 0.5 * beta
    }
}

/// Every ordering of `0..n` tracing the same curve.
pub fn curve_orderings(kind: PolylineKind, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![(0..n).collect::<Vec<_>>(), (0..n).rev().collect()];
    if kind == PolylineKind::Closed {
        for start in 0..n {
            let mut fwd = Vec::new();
            let mut bwd = Vec::new();
            for j in 0..n {
                fwd.push((start + j) % n);
                bwd.push((start + n * n - j) % n);
            }
            out.push(fwd);
            out.push(bwd);
        }
    }
    out
}

pub fn line_cost_oracle(pred: &[Point2<f64>], gt: &[Point2<f64>], kind: PolylineKind, beta: f64) -> f64 {
    let n = gt.len();
    curve_orderings(kind, n)
        .into_iter()
        .map(|perm| {
            let mut acc = 0.0;
            for j in 0..n {
                let g = gt[perm[j]];
                acc += huber(pred[j].x - g.x, beta) + huber(pred[j].y - g.y, beta);
            }
            acc / n as f64
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn focal_oracle(logit: f64, alpha: f64, gamma: f64) -> f64 {
    let p = 1.0 / (1.0 + (-logit).exp());
    -alpha * (1.0 - p).powf(gamma) * p.max(1e-8).ln()
}

/// Minimum total over all injective assignments of the smaller side,
/// summing pairs in row order.
pub fn brute_force_assignment(c: &[Vec<f64>]) -> f64 {
    let rows = c.len();
    let cols = if rows == 0 { 0 } else { c[0].len() };
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    let mut used = vec![false; cols.max(rows)];
    if rows <= cols {
        fn go(c: &[Vec<f64>], r: usize, used: &mut [bool], acc: f64, best: &mut f64) {
            if r == c.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..c[0].len() {
                if !used[j] {
                    used[j] = true;
                    go(c, r + 1, used, acc + c[r][j], best);
                    used[j] = false;
                }
            }
        }
        go(c, 0, &mut used, 0.0, &mut best);
    } else {
        // choose a row for each column, then sum in row order
        fn go(c: &[Vec<f64>], col: usize, row_of: &mut Vec<Option<usize>>, best: &mut f64) {
            if col == c[0].len() {
                let mut acc = 0.0;
                for (r, chosen) in row_of.iter().enumerate() {
                    if let Some(j) = chosen {
                        acc += c[r][*j];
                    }
                }
                *best = best.min(acc);
                return;
            }
            for r in 0..c.len() {
                if row_of[r].is_none() {
                    row_of[r] = Some(col);
                    go(c, col + 1, row_of, best);
                    row_of[r] = None;
                }
            }
        }
        let mut row_of = vec![None; rows];
        go(c, 0, &mut row_of, &mut best);
    }
    best
}

// ----------------------------------------------------------------- metrics

/// Per-segment uniform samples at pitch ≤ `spacing`, original vertices kept.
pub fn densify_oracle(p: &Polyline<f64>, spacing: f64) -> Vec<Point2<f64>> {
    let pts = p.points();
    let n = pts.len();
    let segs = if p.is_closed() { n } else { n - 1 };
    let mut out = Vec::new();
    for s in 0..segs {
        let a = pts[s];
        let b = pts[(s + 1) % n];
        let len = ((b.x - a.x).powi(2) + (b.y - a.y).powi(2)).sqrt();
        let m = ((len / spacing).ceil() as usize).max(1);
        for k in 0..m {
            let t = k as f64 / m as f64;
            if 2 * k <= m {
                out.push(Point2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t));
            } else {
                let t = (m - k) as f64 / m as f64;
                out.push(Point2::new(b.x + (a.x - b.x) * t, b.y + (a.y - b.y) * t));
            }
        }
    }
    if !p.is_closed() {
        out.push(pts[n - 1]);
    }
    out
}

pub fn chamfer_oracle(a: &Polyline<f64>, b: &Polyline<f64>, spacing: f64) -> f64 {
    let (da, db) = (densify_oracle(a, spacing), densify_oracle(b, spacing));
    let one_way = |from: &[Point2<f64>], to: &[Point2<f64>]| {
        from.iter()
            .map(|p| to.iter().map(|q| (p.x - q.x).powi(2) + (p.y - q.y).powi(2)).fold(f64::INFINITY, f64::min).sqrt())
            .sum::<f64>()
            / from.len() as f64
    };
    0.5 * (one_way(&da, &db) + one_way(&db, &da))
}

/// `(confidence, is_tp)` per prediction of one class in one frame, in
/// greedy processing order.
pub fn greedy_frame(preds: &[&MapInstance<f64>], gts: &[&MapInstance<f64>], thr: f64, spacing: f64) -> Vec<(f64, bool)> {
    let d: Vec<Vec<f64>> =
        preds.iter().map(|p| gts.iter().map(|g| chamfer_oracle(&p.polyline, &g.polyline, spacing)).collect()).collect();
    let nearest: Vec<f64> = d.iter().map(|r| r.iter().copied().fold(f64::INFINITY, f64::min)).collect();
    let mut order: Vec<usize> = (0..preds.len()).collect();
    // insertion sort on (confidence desc, nearest asc, index asc)
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (order[j - 1], order[j]);
            let key = |x: usize| (-preds[x].confidence(), nearest[x], x);
            let (ka, kb) = (key(a), key(b));
            let swap = kb.0 < ka.0 || (kb.0 == ka.0 && (kb.1 < ka.1 || (kb.1 == ka.1 && kb.2 < ka.2)));
            if !swap {
                break;
            }
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut free = vec![true; gts.len()];
    let mut out = Vec::new();
    for i in order {
        let mut best: Option<usize> = None;
        for g in 0..gts.len() {
            if free[g] && best.map_or(true, |b| d[i][g] < d[i][b]) {
                best = Some(g);
            }
        }
        let tp = matches!(best, Some(g) if d[i][g] < thr);
        if tp {
            free[best.unwrap()] = false;
        }
        out.push((preds[i].confidence(), tp));
    }
    out
}

/// Area under the all-points interpolated PR curve: at every recall level
/// reached, the best precision at that or any later rank.
pub fn ap_oracle(ranked: &[(f64, bool)], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let n = ranked.len();
    let mut tp = 0;
    let mut prec = vec![0.0; n];
    let mut rec = vec![0.0; n];
    for k in 0..n {
        if ranked[k].1 {
            tp += 1;
        }
        prec[k] = tp as f64 / (k + 1) as f64;
        rec[k] = tp as f64 / n_gt as f64;
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for k in 0..n {
        let env = prec[k..].iter().copied().fold(0.0, f64::max);
        ap += (rec[k] - prev) * env;
        prev = rec[k];
    }
    ap
}

/// Stable descending sort by confidence.
pub fn stable_rank(v: &mut Vec<(f64, bool)>) {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].0.partial_cmp(&v[a].0).unwrap().then(a.cmp(&b)));
    *v = idx.into_iter().map(|i| v[i]).collect();
}

/// Per class: AP at each threshold, or `None` when the class is absent.
pub fn evaluate_oracle(
    frames: &[(Vec<MapInstance<f64>>, Vec<MapInstance<f64>>)],
    thresholds: &[f64],
    spacing: f64,
) -> (Vec<Option<Vec<f64>>>, f64) {
    let mut classes = Vec::new();
    for c in ClassId::ALL {
        let mut n_gt = 0;
        let mut n_pred = 0;
        let mut aps = Vec::new();
        for &thr in thresholds {
            let mut pooled = Vec::new();
            n_gt = 0;
            n_pred = 0;
            for (preds, gts) in frames {
                let p: Vec<&MapInstance<f64>> = preds.iter().filter(|x| x.class == c).collect();
                let g: Vec<&MapInstance<f64>> = gts.iter().filter(|x| x.class == c).collect();
                n_gt += g.len();
                n_pred += p.len();
                pooled.extend(greedy_frame(&p, &g, thr, spacing));
            }
            stable_rank(&mut pooled);
            aps.push(ap_oracle(&pooled, n_gt));
        }
        classes.push((n_gt + n_pred > 0).then_some(aps));
    }
    let present: Vec<f64> =
        classes.iter().flatten().map(|a| a.iter().sum::<f64>() / a.len() as f64).collect();
    let map = if present.is_empty() { 0.0 } else { present.iter().sum::<f64>() / present.len() as f64 };
    (classes, map)
}

// --------------------------------------------------------------- attention

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn linear(l: &Linear<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; l.out_dim];
    for o in 0..l.out_dim {
        let mut s = 0.0;
        for i in 0..l.in_dim {
            s += l.weight[o * l.in_dim + i] * x[i];
        }
        if let Some(b) = &l.bias {
            s += b[o];
        }
        y[o] = s;
    }
    y
}

pub fn mlp(m: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
    let h: Vec<f64> = linear(&m.hidden, x).into_iter().map(|v| if v > 0.0 { v } else { 0.0 }).collect();
    linear(&m.output, &h)
}

pub fn layer_norm(n: &LayerNorm<f64>, x: &[f64]) -> Vec<f64> {
    let len = x.len() as f64;
    let mean = x.iter().sum::<f64>() / len;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
    x.iter().enumerate().map(|(i, v)| (v - mean) / (var + n.eps).sqrt() * n.gain[i] + n.bias[i]).collect()
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Raw-channel bilinear read at a unit-square location: zero outside the
/// raster extent, border-clamped neighbours inside it.
pub fn bilinear(f: &BevGrid<f64>, u: f64, v: f64) -> Vec<f64> {
    let (h, w, c) = f.shape();
    let fi = (1.0 - u) * h as f64 - 0.5;
    let fj = (1.0 - v) * w as f64 - 0.5;
    if fi < -0.5 || fi > h as f64 - 0.5 || fj < -0.5 || fj > w as f64 - 0.5 {
        return vec![0.0; c];
    }
    let fi = fi.clamp(0.0, (h - 1) as f64);
    let fj = fj.clamp(0.0, (w - 1) as f64);
    let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
    let (i1, j1) = ((i0 + 1).min(h - 1), (j0 + 1).min(w - 1));
    let (a, b) = (fi - i0 as f64, fj - j0 as f64);
    (0..c)
        .map(|k| {
            f.cell(i0, j0)[k] * (1.0 - a) * (1.0 - b)
                + f.cell(i0, j1)[k] * (1.0 - a) * b
                + f.cell(i1, j0)[k] * a * (1.0 - b)
                + f.cell(i1, j1)[k] * a * b
        })
        .collect()
}

/// Multi-point attention output: every slot sampled and projected
/// separately, then weighted.
pub fn mpa_oracle(
    q: &[f64],
    pts: &[Point2<f64>],
    f: &BevGrid<f64>,
    value: &Linear<f64>,
    offset: &Linear<f64>,
    weight: &Linear<f64>,
    n_off: usize,
) -> Vec<f64> {
    let off = linear(offset, q);
    let wts = softmax(&linear(weight, q));
    let mut out = vec![0.0; value.out_dim];
    for j in 0..pts.len() {
        for k in 0..n_off {
            let s = j * n_off + k;
            let sample = linear(value, &bilinear(f, pts[j].x + off[2 * s], pts[j].y + off[2 * s + 1]));
            for d in 0..out.len() {
                out[d] += wts[s] * sample[d];
            }
        }
    }
    out
}

pub struct OracleQuery {
    pub embedding: Vec<f64>,
    pub points: Vec<Point2<f64>>,
    pub score: f64,
}

/// Reference forward of the decoder stack.
pub fn decode_oracle(w: &DecoderWeights<f64>, f: &BevGrid<f64>, init: &[(Vec<f64>, Vec<Point2<f64>>)]) -> Vec<OracleQuery> {
    let cfg: &AttentionConfig = &w.cfg;
    let mut emb: Vec<Vec<f64>> = init.iter().map(|q| q.0.clone()).collect();
    let mut pts: Vec<Vec<Point2<f64>>> = init.iter().map(|q| q.1.clone()).collect();
    let mut scores = vec![0.0; init.len()];
    for l in &w.layers {
        let x: Vec<Vec<f64>> = emb.iter().map(|e| layer_norm(&l.sa_norm, e)).collect();
        let qs: Vec<Vec<f64>> = x.iter().map(|v| linear(&l.sa_q, v)).collect();
        let ks: Vec<Vec<f64>> = x.iter().map(|v| linear(&l.sa_k, v)).collect();
        let vs: Vec<Vec<f64>> = x.iter().map(|v| linear(&l.sa_v, v)).collect();
        let scale = 1.0 / (cfg.d as f64).sqrt();
        for i in 0..emb.len() {
            let logits: Vec<f64> = ks.iter().map(|k| k.iter().zip(&qs[i]).map(|(a, b)| a * b).sum::<f64>() * scale).collect();
            let a = softmax(&logits);
            let mut mix = vec![0.0; cfg.d];
            for (j, v) in vs.iter().enumerate() {
                for d in 0..cfg.d {
                    mix[d] += a[j] * v[d];
                }
            }
            let o = linear(&l.sa_o, &mix);
            for d in 0..cfg.d {
                emb[i][d] += o[d];
            }
        }
        for i in 0..emb.len() {
            let x = layer_norm(&l.ca_norm, &emb[i]);
            let mut e = mpa_oracle(&x, &pts[i], f, &w.value_proj, &l.mpa.offset, &l.mpa.weight, cfg.n_off);
            let ff = mlp(&l.ffn, &layer_norm(&l.ffn_norm, &e));
            for d in 0..cfg.d {
                e[d] += ff[d];
            }
            let r = mlp(&w.reg, &e);
            pts[i] = (0..cfg.n_p).map(|j| Point2::new(sigmoid(r[2 * j]), sigmoid(r[2 * j + 1]))).collect();
            scores[i] = linear(&w.cls, &e).into_iter().map(sigmoid).fold(0.0, f64::max);
            emb[i] = e;
        }
    }
    emb.into_iter()
        .zip(pts)
        .zip(scores)
        .map(|((embedding, points), score)| OracleQuery { embedding, points, score })
        .collect()
}

// --------------------------------------------------------------- fixtures

pub fn random_unit_polyline(r: &mut impl Rng, n: usize, kind: PolylineKind) -> Polyline<f64> {
    loop {
        let pts: Vec<Point2<f64>> = (0..n).map(|_| Point2::new(r.gen_range(0.0..1.0), r.gen_range(0.0..1.0))).collect();
        if let Ok(p) = Polyline::new(pts, kind) {
            if p.len() == n {
                return p;
            }
        }
    }
}
