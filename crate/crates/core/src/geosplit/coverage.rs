use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::trajectory::Trajectory;
use crate::error::{Error, Result};

/// Boolean occupancy on the city-wide lattice whose cell `(gx, gy)` spans
/// `[gx·res, (gx+1)·res) × [gy·res, (gy+1)·res)`. Rasters of equal
/// resolution are therefore always aligned.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageRaster {
    pub city: String,
    resolution: f64,
    /// Lattice index of cell `(0, 0)`.
    origin: (i64, i64),
    width: usize,
    height: usize,
    bits: Vec<u64>,
}

impl CoverageRaster {
    pub fn empty(city: impl Into<String>, resolution: f64) -> Self {
        Self { city: city.into(), resolution, origin: (0, 0), width: 0, height: 0, bits: Vec::new() }
    }

    /// Raster holding exactly the given lattice cells.
    pub fn from_cells(city: impl Into<String>, resolution: f64, cells: &[(i64, i64)]) -> Result<Self> {
        check_positive("resolution", resolution)?;
        let Some(&(x, y)) = cells.first() else {
            return Ok(Self::empty(city, resolution));
        };
        let (mut x0, mut x1, mut y0, mut y1) = (x, x, y, y);
        for &(x, y) in cells {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let mut r = Self::blank(city.into(), resolution, (x0, y0), (x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
        for &(x, y) in cells {
            r.set_lattice(x, y);
        }
        Ok(r)
    }

    fn blank(city: String, resolution: f64, origin: (i64, i64), width: usize, height: usize) -> Self {
        Self { city, resolution, origin, width, height, bits: vec![0; (width * height).div_ceil(64)] }
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> (i64, i64) {
        self.origin
    }

    /// World coordinates of the lower-left corner of cell `(0, 0)`.
    pub fn origin_world(&self) -> (f64, f64) {
        (self.origin.0 as f64 * self.resolution, self.origin.1 as f64 * self.resolution)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Column `col` grows with world x, row `row` with world y.
    pub fn get(&self, col: usize, row: usize) -> bool {
        let i = row * self.width + col;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn contains_lattice(&self, x: i64, y: i64) -> bool {
        let (c, r) = (x - self.origin.0, y - self.origin.1);
        c >= 0 && r >= 0 && (c as usize) < self.width && (r as usize) < self.height && self.get(c as usize, r as usize)
    }

    fn set_lattice(&mut self, x: i64, y: i64) {
        let i = (y - self.origin.1) as usize * self.width + (x - self.origin.0) as usize;
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn occupied(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn area_m2(&self) -> f64 {
        self.occupied() as f64 * self.resolution * self.resolution
    }

    pub fn area_km2(&self) -> f64 {
        self.area_m2() / 1e6
    }

    /// Occupied lattice cells, row by row.
    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (0..self.height).flat_map(move |r| {
            (0..self.width).filter(move |&c| self.get(c, r)).map(move |c| (c as i64 + self.origin.0, r as i64 + self.origin.1))
        })
    }

    /// Cells occupied in both rasters.
    pub fn intersection_count(&self, o: &Self) -> usize {
        if self.occupied() == 0 || o.occupied() == 0 {
            return 0;
        }
        let x0 = self.origin.0.max(o.origin.0);
        let y0 = self.origin.1.max(o.origin.1);
        let x1 = (self.origin.0 + self.width as i64).min(o.origin.0 + o.width as i64);
        let y1 = (self.origin.1 + self.height as i64).min(o.origin.1 + o.height as i64);
        let mut n = 0;
        for y in y0..y1 {
            for x in x0..x1 {
                if self.contains_lattice(x, y) && o.contains_lattice(x, y) {
                    n += 1;
                }
            }
        }
        n
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
    }
    Ok(())
}

/// Lattice cells whose centers lie within `radius` of any position of `traj`,
/// sorted and unique.
pub fn scene_cells(traj: &Trajectory, radius: f64, resolution: f64) -> Vec<(i64, i64)> {
    let pts: Vec<_> = traj.positions().collect();
    let lattice = |v: f64| (v / resolution - 0.5).floor() as i64;
    let x0 = pts.iter().map(|p| lattice(p.x - radius)).min().unwrap_or(0) - 1;
    let x1 = pts.iter().map(|p| lattice(p.x + radius)).max().unwrap_or(0) + 2;
    let y0 = pts.iter().map(|p| lattice(p.y - radius)).min().unwrap_or(0) - 1;
    let y1 = pts.iter().map(|p| lattice(p.y + radius)).max().unwrap_or(0) + 2;
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    let mut mask = vec![false; w * h];
    let r2 = radius * radius;
    for p in &pts {
        let ya = lattice(p.y - radius).max(y0);
        let yb = (lattice(p.y + radius) + 1).min(y1);
        for gy in ya..=yb {
            let dy = (gy as f64 + 0.5) * resolution - p.y;
            if dy * dy > r2 {
                continue;
            }
            let half = (r2 - dy * dy).sqrt();
            let xa = (lattice(p.x - half) - 1).max(x0);
            let xb = (lattice(p.x + half) + 1).min(x1);
            for gx in xa..=xb {
                let dx = (gx as f64 + 0.5) * resolution - p.x;
                if dx * dx + dy * dy <= r2 {
                    mask[(gy - y0) as usize * w + (gx - x0) as usize] = true;
                }
            }
        }
    }
    let mut out = Vec::new();
    for gx in 0..w {
        for gy in 0..h {
            if mask[gy * w + gx] {
                out.push((gx as i64 + x0, gy as i64 + y0));
            }
        }
    }
    out
}

/// Union of disks around every pose, one raster per city (sorted by city).
pub fn coverage(trajs: &[Trajectory], radius: f64, resolution: f64) -> Result<Vec<CoverageRaster>> {
    check_positive("radius", radius)?;
    check_positive("resolution", resolution)?;
    let per_scene: Vec<(String, Vec<(i64, i64)>)> =
        trajs.par_iter().map(|t| (t.city.clone(), scene_cells(t, radius, resolution))).collect();
    let mut by_city: BTreeMap<String, Vec<(i64, i64)>> = BTreeMap::new();
    for (city, cells) in per_scene {
        by_city.entry(city).or_default().extend(cells);
    }
    by_city.into_iter().map(|(city, cells)| CoverageRaster::from_cells(city, resolution, &cells)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CityOverlap {
    pub city: String,
    pub area_a_km2: f64,
    pub area_b_km2: f64,
    pub overlap_km2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub area_a_km2: f64,
    pub area_b_km2: f64,
    pub overlap_km2: f64,
    /// `overlap / area_b`, 0 when `b` is empty.
    pub ratio: f64,
    pub per_city: Vec<CityOverlap>,
}

fn merge_by_city(set: &[CoverageRaster]) -> Result<BTreeMap<&str, CoverageRaster>> {
    let mut out: BTreeMap<&str, CoverageRaster> = BTreeMap::new();
    for r in set {
        match out.get_mut(r.city.as_str()) {
            None => {
                out.insert(&r.city, r.clone());
            }
            Some(acc) => {
                if acc.resolution != r.resolution {
                    return Err(Error::ResolutionMismatch(acc.resolution, r.resolution));
                }
                let cells: Vec<_> = acc.cells().chain(r.cells()).collect();
                *acc = CoverageRaster::from_cells(r.city.clone(), r.resolution, &cells)?;
            }
        }
    }
    Ok(out)
}

/// Overlap of two coverage sets, `b` being the validation side. Cities never
/// overlap each other.
pub fn overlap(a: &[CoverageRaster], b: &[CoverageRaster]) -> Result<OverlapReport> {
    let a = merge_by_city(a)?;
    let b = merge_by_city(b)?;
    let mut cities: Vec<&str> = a.keys().chain(b.keys()).copied().collect();
    cities.sort_unstable();
    cities.dedup();
    let mut per_city = Vec::new();
    let (mut ta, mut tb, mut to) = (0.0, 0.0, 0.0);
    for city in cities {
        let (ra, rb) = (a.get(city), b.get(city));
        let cell_km2 = |r: &CoverageRaster| r.resolution * r.resolution / 1e6;
        let overlap_km2 = match (ra, rb) {
            (Some(x), Some(y)) => {
                if x.resolution != y.resolution {
                    return Err(Error::ResolutionMismatch(x.resolution, y.resolution));
                }
                x.intersection_count(y) as f64 * cell_km2(x)
            }
            _ => 0.0,
        };
        let c = CityOverlap {
            city: city.to_string(),
            area_a_km2: ra.map_or(0.0, |r| r.occupied() as f64 * cell_km2(r)),
            area_b_km2: rb.map_or(0.0, |r| r.occupied() as f64 * cell_km2(r)),
            overlap_km2,
        };
        ta += c.area_a_km2;
        tb += c.area_b_km2;
        to += c.overlap_km2;
        per_city.push(c);
    }
    Ok(OverlapReport { area_a_km2: ta, area_b_km2: tb, overlap_km2: to, ratio: if tb > 0.0 { to / tb } else { 0.0 }, per_city })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_disk_area() {
        let t = Trajectory::from_positions("s", "c", &[(3.3, -7.1)]).unwrap();
        let cov = coverage(&[t], 30.0, 0.5).unwrap();
        let area = cov[0].area_m2();
        let exact = std::f64::consts::PI * 900.0;
        assert!((area - exact).abs() / exact < 0.02, "{area}");
    }

    #[test]
    fn cells_match_center_rule() {
        let t = Trajectory::from_positions("s", "c", &[(0.7, 0.2), (4.0, 1.0)]).unwrap();
        let cells = scene_cells(&t, 2.5, 0.5);
        for gx in -20..30 {
            for gy in -20..20 {
                let (cx, cy) = ((gx as f64 + 0.5) * 0.5, (gy as f64 + 0.5) * 0.5);
                let inside = t.positions().any(|p| (cx - p.x).powi(2) + (cy - p.y).powi(2) <= 6.25);
                assert_eq!(inside, cells.binary_search(&(gx, gy)).is_ok(), "{gx} {gy}");
            }
        }
    }

    #[test]
    fn overlap_basics() {
        let a = CoverageRaster::from_cells("c", 1.0, &[(0, 0), (1, 0), (2, 0)]).unwrap();
        let b = CoverageRaster::from_cells("c", 1.0, &[(2, 0), (3, 0)]).unwrap();
        let r = overlap(&[a.clone()], &[b.clone()]).unwrap();
        assert_eq!(r.ratio, 0.5);
        assert_eq!(overlap(&[a.clone()], &[a.clone()]).unwrap().ratio, 1.0);
        let other_city = CoverageRaster::from_cells("d", 1.0, &[(0, 0)]).unwrap();
        assert_eq!(overlap(&[a.clone()], &[other_city]).unwrap().overlap_km2, 0.0);
        let coarse = CoverageRaster::from_cells("c", 2.0, &[(0, 0)]).unwrap();
        assert!(matches!(overlap(&[a], &[coarse]), Err(Error::ResolutionMismatch(..))));
        assert_eq!(overlap(&[], &[]).unwrap().ratio, 0.0);
    }

    #[test]
    fn empty_inputs() {
        assert!(coverage(&[], 30.0, 0.5).unwrap().is_empty());
        assert!(coverage(&[], 0.0, 0.5).is_err());
    }
}
