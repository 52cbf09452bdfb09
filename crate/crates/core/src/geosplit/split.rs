use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::Serialize;

use super::coverage::{coverage, overlap, scene_cells};
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::rng::XorShift64Star;

pub const DEFAULT_RADIUS: f64 = 30.0;
pub const DEFAULT_RESOLUTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct SplitParams {
    pub n_train: usize,
    pub n_val: usize,
    pub radius: f64,
    pub resolution: f64,
    pub balance_keys: Vec<String>,
    pub seed: u64,
    /// Seeded random splits the result must not be worse than.
    pub random_trials: usize,
    pub max_swaps: usize,
    /// Clusters of up to this many scenes are solved exactly by enumeration.
    pub exact_cluster_limit: usize,
}

impl SplitParams {
    pub fn new(n_train: usize, n_val: usize) -> Self {
        Self {
            n_train,
            n_val,
            radius: DEFAULT_RADIUS,
            resolution: DEFAULT_RESOLUTION,
            balance_keys: Vec::new(),
            seed: 0,
            random_trials: 1000,
            max_swaps: 10_000,
            exact_cluster_limit: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CitySplit {
    pub city: String,
    pub train_scenes: usize,
    pub val_scenes: usize,
    pub train_km2: f64,
    pub val_km2: f64,
    pub overlap_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceEntry {
    pub key: String,
    /// Total-variation distance between the train and val value distributions.
    pub deviation: f64,
    pub train: BTreeMap<String, usize>,
    pub val: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub seed: u64,
    pub radius: f64,
    pub resolution: f64,
    pub train_km2: f64,
    pub val_km2: f64,
    pub overlap_km2: f64,
    pub overlap_ratio: f64,
    /// Which search stage produced the split: `clusters`, `exact` or `random`.
    pub method: String,
    pub clusters: usize,
    pub swaps: usize,
    pub best_random_ratio: Option<f64>,
    pub max_balance_deviation: f64,
    pub per_city: Vec<CitySplit>,
    pub balance: Vec<BalanceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub report: SplitReport,
}

/// Overlap and validation area in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Score {
    overlap: u64,
    val: u64,
}

impl Score {
    fn ratio(self) -> f64 {
        if self.val == 0 {
            0.0
        } else {
            self.overlap as f64 / self.val as f64
        }
    }

    /// Exact comparison of `overlap / val`.
    fn cmp_ratio(self, o: Score) -> Ordering {
        let a = if self.val == 0 { 0 } else { self.overlap as u128 * o.val.max(1) as u128 };
        let b = if o.val == 0 { 0 } else { o.overlap as u128 * self.val.max(1) as u128 };
        match (self.val == 0, o.val == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => 0u128.cmp(&(o.overlap as u128)),
            (false, true) => (self.overlap as u128).cmp(&0),
            _ => a.cmp(&b),
        }
    }
}

struct Problem {
    /// Dense cell ids per scene, sorted.
    cells: Vec<Vec<u32>>,
    n_cells: usize,
    /// Per balance key, the value index of each scene.
    attrs: Vec<(String, Vec<String>, Vec<usize>)>,
}

impl Problem {
    fn new(trajs: &[Trajectory], p: &SplitParams) -> Self {
        let mut cities: Vec<&str> = trajs.iter().map(|t| t.city.as_str()).collect();
        cities.sort_unstable();
        cities.dedup();
        let raw: Vec<Vec<(u32, i64, i64)>> = trajs
            .par_iter()
            .map(|t| {
                let c = cities.binary_search(&t.city.as_str()).expect("city listed") as u32;
                scene_cells(t, p.radius, p.resolution).into_iter().map(|(x, y)| (c, x, y)).collect()
            })
            .collect();
        let mut all: Vec<(u32, i64, i64)> = raw.iter().flatten().copied().collect();
        all.par_sort_unstable();
        all.dedup();
        let cells = raw
            .par_iter()
            .map(|sc| {
                let mut ids: Vec<u32> = sc.iter().map(|k| all.binary_search(k).expect("cell listed") as u32).collect();
                ids.sort_unstable();
                ids
            })
            .collect();
        let attrs = p
            .balance_keys
            .iter()
            .map(|k| {
                let vals: Vec<String> = trajs.iter().map(|t| t.attribute(k).unwrap_or("<none>").to_string()).collect();
                let mut names = vals.clone();
                names.sort();
                names.dedup();
                let idx = vals.iter().map(|v| names.binary_search(v).expect("value listed")).collect();
                (k.clone(), names, idx)
            })
            .collect();
        Self { cells, n_cells: all.len(), attrs }
    }

    fn n(&self) -> usize {
        self.cells.len()
    }

    fn score(&self, in_val: &[bool]) -> Score {
        let mut marks = vec![0u8; self.n_cells];
        for (s, cells) in self.cells.iter().enumerate() {
            let bit = if in_val[s] { 2 } else { 1 };
            for &c in cells {
                marks[c as usize] |= bit;
            }
        }
        let mut sc = Score { overlap: 0, val: 0 };
        for m in marks {
            sc.val += (m & 2 != 0) as u64;
            sc.overlap += (m == 3) as u64;
        }
        sc
    }

    fn balance(&self, in_val: &[bool]) -> f64 {
        let n_val = in_val.iter().filter(|v| **v).count();
        let n_train = in_val.len() - n_val;
        if n_val == 0 || n_train == 0 {
            return 0.0;
        }
        self.attrs
            .iter()
            .map(|(_, names, idx)| {
                let mut t = vec![0usize; names.len()];
                let mut v = vec![0usize; names.len()];
                for (s, &i) in idx.iter().enumerate() {
                    if in_val[s] {
                        v[i] += 1;
                    } else {
                        t[i] += 1;
                    }
                }
                0.5 * t.iter().zip(&v).map(|(a, b)| (*a as f64 / n_train as f64 - *b as f64 / n_val as f64).abs()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Connected components of scenes sharing at least one cell.
    fn clusters(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.n()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut owner = vec![usize::MAX; self.n_cells];
        for (s, cells) in self.cells.iter().enumerate() {
            for &c in cells {
                let o = owner[c as usize];
                if o == usize::MAX {
                    owner[c as usize] = s;
                } else {
                    let (a, b) = (find(&mut parent, o), find(&mut parent, s));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for s in 0..self.n() {
            let r = find(&mut parent, s);
            groups.entry(r).or_default().push(s);
        }
        groups.into_values().collect()
    }
}

/// Incrementally maintained per-cell scene counts on each side.
struct Counts<'a> {
    p: &'a Problem,
    train: Vec<u32>,
    val: Vec<u32>,
    score: Score,
}

impl<'a> Counts<'a> {
    fn new(p: &'a Problem, in_val: &[bool]) -> Self {
        let mut train = vec![0u32; p.n_cells];
        let mut val = vec![0u32; p.n_cells];
        for (s, cells) in p.cells.iter().enumerate() {
            let side = if in_val[s] { &mut val } else { &mut train };
            for &c in cells {
                side[c as usize] += 1;
            }
        }
        let score = p.score(in_val);
        Self { p, train, val, score }
    }

    /// Score after moving `to_val` into val and `to_train` into train.
    fn preview(&self, to_val: Option<usize>, to_train: Option<usize>) -> Score {
        let empty: &[u32] = &[];
        let a = to_val.map_or(empty, |s| &self.p.cells[s]);
        let b = to_train.map_or(empty, |s| &self.p.cells[s]);
        let (mut dv, mut dov) = (0i64, 0i64);
        let mut visit = |c: u32, ina: u32, inb: u32| {
            let (t, v) = (self.train[c as usize], self.val[c as usize]);
            let (t2, v2) = (t + inb - ina, v + ina - inb);
            dv += (v2 > 0) as i64 - (v > 0) as i64;
            dov += (t2 > 0 && v2 > 0) as i64 - (t > 0 && v > 0) as i64;
        };
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j >= b.len() || (i < a.len() && a[i] < b[j]) {
                visit(a[i], 1, 0);
                i += 1;
            } else if i >= a.len() || b[j] < a[i] {
                visit(b[j], 0, 1);
                j += 1;
            } else {
                visit(a[i], 1, 1);
                i += 1;
                j += 1;
            }
        }
        Score { overlap: (self.score.overlap as i64 + dov) as u64, val: (self.score.val as i64 + dv) as u64 }
    }

    fn apply(&mut self, to_val: Option<usize>, to_train: Option<usize>) {
        self.score = self.preview(to_val, to_train);
        if let Some(s) = to_val {
            for &c in &self.p.cells[s] {
                self.train[c as usize] -= 1;
                self.val[c as usize] += 1;
            }
        }
        if let Some(s) = to_train {
            for &c in &self.p.cells[s] {
                self.val[c as usize] -= 1;
                self.train[c as usize] += 1;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    in_val: Vec<bool>,
    score: Score,
    balance: f64,
}

impl Candidate {
    fn new(p: &Problem, in_val: Vec<bool>) -> Self {
        let score = p.score(&in_val);
        let balance = p.balance(&in_val);
        Self { in_val, score, balance }
    }

    fn better_than(&self, o: &Candidate) -> bool {
        match self.score.cmp_ratio(o.score) {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.balance < o.balance - 1e-12,
        }
    }
}

/// Whole clusters chosen by subset sum to get as close to `n_val` as
/// possible from below, then single scenes added greedily.
fn seed_from_clusters(p: &Problem, clusters: &[Vec<usize>], n_val: usize) -> Vec<bool> {
    // reach[s] = cluster that first reached sum s
    let mut reach: Vec<Option<(usize, usize)>> = vec![None; n_val + 1];
    let mut reachable = vec![false; n_val + 1];
    reachable[0] = true;
    for (ci, c) in clusters.iter().enumerate() {
        for s in (c.len()..=n_val).rev() {
            if !reachable[s] && reachable[s - c.len()] {
                reachable[s] = true;
                reach[s] = Some((ci, s - c.len()));
            }
        }
    }
    let mut in_val = vec![false; p.n()];
    let mut s = (0..=n_val).rev().find(|&s| reachable[s]).unwrap_or(0);
    while let Some((ci, prev)) = reach[s] {
        for &scene in &clusters[ci] {
            in_val[scene] = true;
        }
        s = prev;
    }
    let mut counts = Counts::new(p, &in_val);
    let mut chosen = in_val.iter().filter(|v| **v).count();
    while chosen < n_val {
        let mut best: Option<(usize, Score)> = None;
        for s in (0..p.n()).filter(|&s| !in_val[s]) {
            let sc = counts.preview(Some(s), None);
            if best.map_or(true, |(_, b)| sc.cmp_ratio(b) == Ordering::Less) {
                best = Some((s, sc));
            }
        }
        let (s, _) = best.expect("enough scenes");
        counts.apply(Some(s), None);
        in_val[s] = true;
        chosen += 1;
    }
    in_val
}

/// Best-improvement pair swaps; a swap must lower the ratio, balance breaks
/// ties between equally good swaps. Returns the number of swaps made.
fn refine(p: &Problem, in_val: &mut [bool], max_swaps: usize) -> usize {
    let mut counts = Counts::new(p, in_val);
    let mut swaps = 0;
    while swaps < max_swaps {
        let train: Vec<usize> = (0..p.n()).filter(|&s| !in_val[s]).collect();
        let val: Vec<usize> = (0..p.n()).filter(|&s| in_val[s]).collect();
        let mut best: Option<(usize, usize, Score, f64)> = None;
        for &a in &train {
            for &b in &val {
                let sc = counts.preview(Some(a), Some(b));
                if sc.cmp_ratio(counts.score) != Ordering::Less {
                    continue;
                }
                let ord = best.map(|(_, _, s, _)| sc.cmp_ratio(s));
                let take = match ord {
                    None | Some(Ordering::Less) => true,
                    Some(Ordering::Greater) => false,
                    Some(Ordering::Equal) => {
                        in_val[a] = true;
                        in_val[b] = false;
                        let bal = p.balance(in_val);
                        in_val[a] = false;
                        in_val[b] = true;
                        bal < best.expect("set").3 - 1e-12
                    }
                };
                if take {
                    in_val[a] = true;
                    in_val[b] = false;
                    let bal = p.balance(in_val);
                    in_val[a] = false;
                    in_val[b] = true;
                    best = Some((a, b, sc, bal));
                }
            }
        }
        let Some((a, b, _, _)) = best else { break };
        counts.apply(Some(a), Some(b));
        in_val[a] = true;
        in_val[b] = false;
        swaps += 1;
    }
    swaps
}

#[derive(Clone, Copy)]
struct FrontEntry {
    overlap: u64,
    val: u64,
    prev_size: usize,
    prev_idx: usize,
    local: usize,
}

/// Keeps points not dominated in (lower overlap, larger val area).
fn pareto(mut v: Vec<FrontEntry>) -> Vec<FrontEntry> {
    v.sort_by(|a, b| a.overlap.cmp(&b.overlap).then(b.val.cmp(&a.val)));
    let mut out: Vec<FrontEntry> = Vec::new();
    for e in v {
        if out.last().map_or(true, |l| e.val > l.val) {
            out.push(e);
        }
    }
    out
}

/// Per cluster and val-subset size, the non-dominated `(overlap, val)`
/// subsets, enumerated in Gray-code order.
fn cluster_fronts(p: &Problem, cluster: &[usize]) -> Vec<Vec<(u64, u64, u64)>> {
    let m = cluster.len();
    let mut local: Vec<u32> = cluster.iter().flat_map(|&s| p.cells[s].iter().copied()).collect();
    local.sort_unstable();
    local.dedup();
    let ids: Vec<Vec<usize>> =
        cluster.iter().map(|&s| p.cells[s].iter().map(|c| local.binary_search(c).expect("local")).collect()).collect();
    let mut tc = vec![0u32; local.len()];
    let mut vc = vec![0u32; local.len()];
    for cells in &ids {
        for &c in cells {
            tc[c] += 1;
        }
    }
    let (mut ov, mut va) = (0i64, 0i64);
    let mut by_size: Vec<Vec<FrontEntry>> = vec![Vec::new(); m + 1];
    let entry = |o: i64, v: i64, mask: u64| FrontEntry { overlap: o as u64, val: v as u64, prev_size: 0, prev_idx: 0, local: mask as usize };
    by_size[0].push(entry(0, 0, 0));
    let mut mask = 0u64;
    for g in 1u64..(1u64 << m) {
        let bit = g.trailing_zeros() as usize;
        let entering = mask >> bit & 1 == 0;
        mask ^= 1 << bit;
        for &c in &ids[bit] {
            let before = (tc[c] > 0 && vc[c] > 0, vc[c] > 0);
            if entering {
                tc[c] -= 1;
                vc[c] += 1;
            } else {
                vc[c] -= 1;
                tc[c] += 1;
            }
            ov += (tc[c] > 0 && vc[c] > 0) as i64 - before.0 as i64;
            va += (vc[c] > 0) as i64 - before.1 as i64;
        }
        by_size[mask.count_ones() as usize].push(entry(ov, va, mask));
    }
    by_size.into_iter().map(|v| pareto(v).into_iter().map(|e| (e.overlap, e.val, e.local as u64)).collect()).collect()
}

/// Exact minimum ratio when every cluster is small enough to enumerate.
/// Clusters share no cells, so a split's overlap and val area are sums of
/// per-cluster terms, and only non-dominated per-cluster choices can be optimal.
fn exact_split(p: &Problem, clusters: &[Vec<usize>], n_val: usize, limit: usize) -> Option<Vec<bool>> {
    if clusters.iter().any(|c| c.len() > limit.min(24)) {
        return None;
    }
    let work: f64 = clusters
        .iter()
        .map(|c| (1u64 << c.len()) as f64 * c.iter().map(|&s| p.cells[s].len()).sum::<usize>() as f64 / c.len() as f64)
        .sum();
    if work > 4e8 {
        return None;
    }
    let fronts: Vec<Vec<Vec<(u64, u64, u64)>>> = clusters.par_iter().map(|c| cluster_fronts(p, c)).collect();
    let mut layers: Vec<Vec<Vec<FrontEntry>>> = Vec::with_capacity(clusters.len());
    let mut cur: Vec<Vec<FrontEntry>> = vec![Vec::new(); n_val + 1];
    cur[0].push(FrontEntry { overlap: 0, val: 0, prev_size: 0, prev_idx: 0, local: 0 });
    for f in &fronts {
        let mut next: Vec<Vec<FrontEntry>> = vec![Vec::new(); n_val + 1];
        for (s0, entries) in cur.iter().enumerate() {
            for (i0, e) in entries.iter().enumerate() {
                for (ds, opts) in f.iter().enumerate().take(n_val + 1 - s0) {
                    for &(o, v, mask) in opts {
                        next[s0 + ds].push(FrontEntry {
                            overlap: e.overlap + o,
                            val: e.val + v,
                            prev_size: s0,
                            prev_idx: i0,
                            local: mask as usize,
                        });
                    }
                }
            }
        }
        let next: Vec<Vec<FrontEntry>> = next.into_iter().map(pareto).collect();
        layers.push(next.clone());
        cur = next;
    }
    let finals = &cur[n_val];
    let mut best = 0;
    for (i, e) in finals.iter().enumerate().skip(1) {
        let (a, b) = (Score { overlap: e.overlap, val: e.val }, Score { overlap: finals[best].overlap, val: finals[best].val });
        if a.cmp_ratio(b) == Ordering::Less {
            best = i;
        }
    }
    finals.get(best)?;
    let mut in_val = vec![false; p.n()];
    let (mut size, mut idx) = (n_val, best);
    for (ci, layer) in layers.iter().enumerate().rev() {
        let e = layer[size][idx];
        for (bit, &s) in clusters[ci].iter().enumerate() {
            if e.local >> bit & 1 == 1 {
                in_val[s] = true;
            }
        }
        size = e.prev_size;
        idx = e.prev_idx;
    }
    Some(in_val)
}

fn random_splits(p: &Problem, n_val: usize, trials: usize, seed: u64) -> Option<Candidate> {
    let mut rng = XorShift64Star::new(seed);
    let masks: Vec<Vec<bool>> = (0..trials)
        .map(|_| {
            let mut idx: Vec<usize> = (0..p.n()).collect();
            rng.shuffle(&mut idx);
            let mut m = vec![false; p.n()];
            for &s in &idx[..n_val] {
                m[s] = true;
            }
            m
        })
        .collect();
    let cands: Vec<Candidate> = masks.into_par_iter().map(|m| Candidate::new(p, m)).collect();
    let mut best: Option<Candidate> = None;
    for c in cands {
        if best.as_ref().map_or(true, |b| c.better_than(b)) {
            best = Some(c);
        }
    }
    best
}

/// Proposes a train/val partition with minimal validation overlap.
///
/// Stages: whole coverage clusters seeded by subset sum and refined by pair
/// swaps; exact enumeration when every cluster is small; the best of
/// `random_trials` seeded random splits. The lowest ratio wins, balance
/// deviation breaks ties, earlier stages win exact ties.
pub fn propose_split(trajs: &[Trajectory], params: &SplitParams) -> Result<SplitResult> {
    if params.n_train + params.n_val != trajs.len() {
        return Err(Error::Infeasible(format!(
            "{} train + {} val scenes requested but {} scenes given",
            params.n_train,
            params.n_val,
            trajs.len()
        )));
    }
    let mut seen = HashSet::new();
    if let Some(t) = trajs.iter().find(|t| !seen.insert(t.scene_id.as_str())) {
        return Err(Error::InvalidArgument(format!("duplicate scene id `{}`", t.scene_id)));
    }
    if !(params.radius > 0.0 && params.resolution > 0.0) {
        return Err(Error::InvalidArgument("radius and resolution must be positive".into()));
    }
    let p = Problem::new(trajs, params);
    let clusters = p.clusters();
    log::info!("split search over {} scenes, {} cells, {} clusters", p.n(), p.n_cells, clusters.len());

    let mut seeded = seed_from_clusters(&p, &clusters, params.n_val);
    let swaps = refine(&p, &mut seeded, params.max_swaps);
    let mut best = (Candidate::new(&p, seeded), "clusters");
    if let Some(mask) = exact_split(&p, &clusters, params.n_val, params.exact_cluster_limit) {
        let c = Candidate::new(&p, mask);
        if c.better_than(&best.0) {
            best = (c, "exact");
        }
    }
    let random = random_splits(&p, params.n_val, params.random_trials, params.seed);
    let best_random_ratio = random.as_ref().map(|c| c.score.ratio());
    if let Some(c) = random {
        if c.better_than(&best.0) {
            best = (c, "random");
        }
    }
    let (cand, method) = best;
    build_result(trajs, params, &p, &cand.in_val, method, clusters.len(), swaps, best_random_ratio)
}

#[allow(clippy::too_many_arguments)]
fn build_result(
    trajs: &[Trajectory],
    params: &SplitParams,
    p: &Problem,
    in_val: &[bool],
    method: &str,
    clusters: usize,
    swaps: usize,
    best_random_ratio: Option<f64>,
) -> Result<SplitResult> {
    let mut train_t: Vec<Trajectory> = Vec::new();
    let mut val_t: Vec<Trajectory> = Vec::new();
    for (t, &v) in trajs.iter().zip(in_val) {
        if v { &mut val_t } else { &mut train_t }.push(t.clone());
    }
    let train_cov = coverage(&train_t, params.radius, params.resolution)?;
    let val_cov = coverage(&val_t, params.radius, params.resolution)?;
    let ov = overlap(&train_cov, &val_cov)?;
    let per_city = ov
        .per_city
        .iter()
        .map(|c| CitySplit {
            city: c.city.clone(),
            train_scenes: train_t.iter().filter(|t| t.city == c.city).count(),
            val_scenes: val_t.iter().filter(|t| t.city == c.city).count(),
            train_km2: c.area_a_km2,
            val_km2: c.area_b_km2,
            overlap_km2: c.overlap_km2,
        })
        .collect();
    let balance: Vec<BalanceEntry> = p
        .attrs
        .iter()
        .map(|(key, names, idx)| {
            let mut train = BTreeMap::new();
            let mut val = BTreeMap::new();
            for (s, &i) in idx.iter().enumerate() {
                *(if in_val[s] { &mut val } else { &mut train }).entry(names[i].clone()).or_insert(0) += 1;
            }
            let single: Vec<(String, Vec<String>, Vec<usize>)> = vec![(key.clone(), names.clone(), idx.clone())];
            let deviation = Problem { cells: Vec::new(), n_cells: 0, attrs: single }.balance(in_val);
            BalanceEntry { key: key.clone(), deviation, train, val }
        })
        .collect();
    let report = SplitReport {
        seed: params.seed,
        radius: params.radius,
        resolution: params.resolution,
        train_km2: ov.area_a_km2,
        val_km2: ov.area_b_km2,
        overlap_km2: ov.overlap_km2,
        overlap_ratio: ov.ratio,
        method: method.to_string(),
        clusters,
        swaps,
        best_random_ratio,
        max_balance_deviation: p.balance(in_val),
        per_city,
        balance,
    };
    Ok(SplitResult {
        train: train_t.iter().map(|t| t.scene_id.clone()).collect(),
        val: val_t.iter().map(|t| t.scene_id.clone()).collect(),
        report,
    })
}
