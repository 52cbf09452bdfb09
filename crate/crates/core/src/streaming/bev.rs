//! Bird's-eye-view feature rasters and the `.bev.bin` file format.
//!
//! Layout: row-major `(H, W, C)`. Row 0 is the front edge (max x), column 0
//! the left edge (max y), so the raster reads like a top-down image with the
//! vehicle heading up. Cell `(i, j)` is centered at
//! `x = x_half - (i + ½)·2x_half/H`, `y = y_half - (j + ½)·2y_half/W`.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::map_model::{PerceptionRange, Point2};
use crate::scalar::Scalar;

const MAGIC: &[u8; 4] = b"BEVF";
/// magic + H, W, C (u32) + x_half, y_half (f32)
pub const BEV_HEADER_LEN: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct BevGrid<T = f32> {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<T>,
    range: PerceptionRange<T>,
}

impl<T: Scalar> BevGrid<T> {
    pub fn new(h: usize, w: usize, c: usize, data: Vec<T>, range: PerceptionRange<T>) -> Result<Self> {
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::ShapeMismatch(format!("BEV grid dimensions must be positive, got {h}x{w}x{c}")));
        }
        if data.len() != h * w * c {
            return Err(Error::ShapeMismatch(format!("BEV grid {h}x{w}x{c} given {} values", data.len())));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("BEV grid contains non-finite values".into()));
        }
        Ok(Self { h, w, c, data, range })
    }

    pub fn zeros(h: usize, w: usize, c: usize, range: PerceptionRange<T>) -> Self {
        Self { h, w, c, data: vec![T::zero(); h * w * c], range }
    }

    pub fn from_fn(h: usize, w: usize, c: usize, range: PerceptionRange<T>, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(h * w * c);
        for i in 0..h {
            for j in 0..w {
                for k in 0..c {
                    data.push(f(i, j, k));
                }
            }
        }
        Self { h, w, c, data, range }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.h
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.w
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn range(&self) -> &PerceptionRange<T> {
        &self.range
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[T] {
        let o = (i * self.w + j) * self.c;
        &self.data[o..o + self.c]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [T] {
        let o = (i * self.w + j) * self.c;
        &mut self.data[o..o + self.c]
    }

    fn pitch(&self) -> (T, T) {
        let two = T::lit(2.0);
        (two * self.range.x_half / T::from_usize_lossy(self.h), two * self.range.y_half / T::from_usize_lossy(self.w))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point2<T> {
        let (px, py) = self.pitch();
        let half = T::lit(0.5);
        Point2::new(
            self.range.x_half - (T::from_usize_lossy(i) + half) * px,
            self.range.y_half - (T::from_usize_lossy(j) + half) * py,
        )
    }

    /// Fractional `(row, col)` of a metric point; cell centers are integers.
    pub fn fractional_index(&self, p: Point2<T>) -> (T, T) {
        let (px, py) = self.pitch();
        let half = T::lit(0.5);
        (snap((self.range.x_half - p.x) / px - half), snap((self.range.y_half - p.y) / py - half))
    }

    /// Fractional index of a unit-square point (see [`PerceptionRange::normalize_point`]).
    pub fn fractional_index_normalized(&self, p: Point2<T>) -> (T, T) {
        let half = T::lit(0.5);
        (
            snap((T::one() - p.x) * T::from_usize_lossy(self.h) - half),
            snap((T::one() - p.y) * T::from_usize_lossy(self.w) - half),
        )
    }

    /// Bilinear sample at a fractional index, accumulated into `out` with
    /// weight `scale`.
    ///
    /// Points outside the raster extent contribute nothing. Inside the extent
    /// the four neighbours are clamped to the border, so a constant field
    /// reads back exactly anywhere within the extent.
    pub fn accumulate_bilinear(&self, fi: T, fj: T, scale: T, out: &mut [T]) -> bool {
        let half = T::lit(0.5);
        let (hf, wf) = (T::from_usize_lossy(self.h), T::from_usize_lossy(self.w));
        if !(fi >= -half && fi <= hf - half && fj >= -half && fj <= wf - half) {
            return false;
        }
        let fi = fi.max(T::zero()).min(hf - T::one());
        let fj = fj.max(T::zero()).min(wf - T::one());
        let i0 = fi.floor().to_usize().unwrap_or(0);
        let j0 = fj.floor().to_usize().unwrap_or(0);
        let i1 = (i0 + 1).min(self.h - 1);
        let j1 = (j0 + 1).min(self.w - 1);
        let ti = fi - T::from_usize_lossy(i0);
        let tj = fj - T::from_usize_lossy(j0);
        let corners = [
            (i0, j0, (T::one() - ti) * (T::one() - tj)),
            (i0, j1, (T::one() - ti) * tj),
            (i1, j0, ti * (T::one() - tj)),
            (i1, j1, ti * tj),
        ];
        for (i, j, wgt) in corners {
            if wgt == T::zero() {
                continue;
            }
            let s = scale * wgt;
            for (o, v) in out.iter_mut().zip(self.cell(i, j)) {
                *o += s * *v;
            }
        }
        true
    }

    /// Bilinear sample at a metric point; zero outside the extent.
    pub fn sample_metric(&self, p: Point2<T>) -> Vec<T> {
        let (fi, fj) = self.fractional_index(p);
        let mut out = vec![T::zero(); self.c];
        self.accumulate_bilinear(fi, fj, T::one(), &mut out);
        out
    }

    /// Bilinear sample at a unit-square point; zero outside the extent.
    pub fn sample_normalized(&self, p: Point2<T>) -> Vec<T> {
        let (fi, fj) = self.fractional_index_normalized(p);
        let mut out = vec![T::zero(); self.c];
        self.accumulate_bilinear(fi, fj, T::one(), &mut out);
        out
    }

    pub fn same_shape(&self, o: &Self) -> bool {
        self.shape() == o.shape() && self.range == o.range
    }

    pub fn cast<U: Scalar>(&self) -> BevGrid<U> {
        BevGrid {
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            range: self.range.cast(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        for d in [self.h, self.w, self.c] {
            let d = u32::try_from(d).map_err(|_| Error::Format("BEV dimension exceeds u32".into()))?;
            w.write_all(&d.to_le_bytes())?;
        }
        for v in [self.range.x_half, self.range.y_half] {
            w.write_all(&(v.to_f32().unwrap_or(f32::NAN)).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; BEV_HEADER_LEN];
        r.read_exact(&mut header).map_err(|_| Error::Format("truncated BEV header".into()))?;
        if &header[0..4] != MAGIC {
            return Err(Error::Format("bad BEV magic".into()));
        }
        let u = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap()) as usize;
        let f = |o: usize| f32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let (h, w, c) = (u(4), u(8), u(12));
        let range = PerceptionRange::new(T::lit(f(16) as f64), T::lit(f(20) as f64))?;
        let count = h
            .checked_mul(w)
            .and_then(|v| v.checked_mul(c))
            .ok_or_else(|| Error::Format("BEV dimensions overflow".into()))?;
        let mut body = vec![0u8; count * 4];
        r.read_exact(&mut body).map_err(|_| Error::Format("truncated BEV body".into()))?;
        let data = body.chunks_exact(4).map(|b| T::lit(f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)).collect();
        Self::new(h, w, c, data, range)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Rounds to the nearest integer when within a few ulps of it, so cell
/// centers hit their cell exactly.
#[inline]
fn snap<T: Scalar>(v: T) -> T {
    let r = v.round();
    let tol = T::epsilon() * T::lit(64.0) * r.abs().max(T::one());
    if (v - r).abs() <= tol {
        r
    } else {
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::RangePreset;

    fn grid() -> BevGrid<f64> {
        BevGrid::from_fn(4, 6, 2, PerceptionRange::preset(RangePreset::Short), |i, j, k| (i * 100 + j * 10 + k) as f64)
    }

    #[test]
    fn centers_are_exact() {
        let g = grid();
        for i in 0..4 {
            for j in 0..6 {
                assert_eq!(g.sample_metric(g.cell_center(i, j)), g.cell(i, j));
                let n = g.range().normalize_point(g.cell_center(i, j));
                assert_eq!(g.sample_normalized(n), g.cell(i, j));
            }
        }
    }

    #[test]
    fn orientation() {
        let g = grid();
        let front_left = g.cell_center(0, 0);
        assert!(front_left.x > 0.0 && front_left.y > 0.0);
        let rear_right = g.cell_center(3, 5);
        assert!(rear_right.x < 0.0 && rear_right.y < 0.0);
    }

    #[test]
    fn midpoint_of_four_cells() {
        let g = grid();
        let a = g.cell_center(1, 2);
        let b = g.cell_center(2, 3);
        let mid = Point2::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        let s = g.sample_metric(mid);
        for k in 0..2 {
            let mean = (g.cell(1, 2)[k] + g.cell(1, 3)[k] + g.cell(2, 2)[k] + g.cell(2, 3)[k]) / 4.0;
            assert!((s[k] - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn outside_is_zero_inside_border_clamped() {
        let g = BevGrid::from_fn(4, 6, 1, PerceptionRange::<f64>::preset(RangePreset::Short), |_, _, _| 2.5);
        assert_eq!(g.sample_metric(Point2::new(29.99, 14.99)), vec![2.5]);
        assert_eq!(g.sample_metric(Point2::new(30.01, 0.0)), vec![0.0]);
        assert_eq!(g.sample_normalized(Point2::new(1.0, 0.0)), vec![2.5]);
        assert_eq!(g.sample_normalized(Point2::new(-0.01, 0.5)), vec![0.0]);
    }

    #[test]
    fn file_roundtrip_and_header() {
        let g = grid().cast::<f32>();
        let mut buf = Vec::new();
        g.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"BEVF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 4);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 6);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 2);
        assert_eq!(f32::from_le_bytes(buf[16..20].try_into().unwrap()), 30.0);
        assert_eq!(buf.len(), BEV_HEADER_LEN + 4 * 48);
        // element (i=1, j=2, k=1) sits at (1*6 + 2)*2 + 1
        let off = BEV_HEADER_LEN + 4 * 17;
        assert_eq!(f32::from_le_bytes(buf[off..off + 4].try_into().unwrap()), 121.0);
        assert_eq!(BevGrid::<f32>::read_from(&buf[..]).unwrap(), g);
        assert!(BevGrid::<f32>::read_from(&buf[..30]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(BevGrid::<f32>::read_from(&bad[..]).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        let r = PerceptionRange::<f64>::preset(RangePreset::Short);
        assert!(BevGrid::new(0, 2, 2, vec![], r).is_err());
        assert!(BevGrid::new(2, 2, 2, vec![0.0; 7], r).is_err());
        assert!(BevGrid::new(1, 1, 1, vec![f64::NAN], r).is_err());
    }
}
