use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::linalg::Linear;
use crate::map_model::Point2;
use crate::scalar::Scalar;
use crate::streaming::BevGrid;

/// Bilinear reads of a value-projected BEV raster at unit-square locations.
///
/// Because the projection is linear, weighted sums of samples are
/// accumulated on the raw channels and projected once. Every location read
/// is counted, which makes the per-query sampling footprint observable.
#[derive(Debug)]
pub struct Sampler<'a, T> {
    grid: &'a BevGrid<T>,
    value: &'a Linear<T>,
    sites: AtomicUsize,
}

impl<'a, T: Scalar> Sampler<'a, T> {
    pub fn new(grid: &'a BevGrid<T>, value: &'a Linear<T>) -> Result<Self> {
        if value.in_dim != grid.channels() {
            return Err(Error::DimensionMismatch { expected: value.in_dim, got: grid.channels() });
        }
        Ok(Self { grid, value, sites: AtomicUsize::new(0) })
    }

    pub fn grid(&self) -> &BevGrid<T> {
        self.grid
    }

    pub fn out_dim(&self) -> usize {
        self.value.out_dim
    }

    /// Locations read so far.
    pub fn sites(&self) -> usize {
        self.sites.load(Ordering::Relaxed)
    }

    pub fn reset_sites(&self) {
        self.sites.store(0, Ordering::Relaxed);
    }

    /// Adds `weight · f(loc)` (raw channels) into `acc`. Outside the raster
    /// the contribution is zero.
    pub fn accumulate(&self, loc: Point2<T>, weight: T, acc: &mut [T]) {
        self.sites.fetch_add(1, Ordering::Relaxed);
        let (fi, fj) = self.grid.fractional_index_normalized(loc);
        self.grid.accumulate_bilinear(fi, fj, weight, acc);
    }

    pub fn raw_accumulator(&self) -> Vec<T> {
        vec![T::zero(); self.grid.channels()]
    }

    pub fn project(&self, raw: &[T]) -> Vec<T> {
        self.value.forward(raw)
    }

    pub fn sample(&self, loc: Point2<T>) -> Vec<T> {
        let mut raw = self.raw_accumulator();
        self.accumulate(loc, T::one(), &mut raw);
        self.project(&raw)
    }
}

/// Value-projected bilinear sample of `f` at a unit-square location.
pub fn deformable_sample<T: Scalar>(f: &BevGrid<T>, value: &Linear<T>, loc: Point2<T>) -> Result<Vec<T>> {
    Ok(Sampler::new(f, value)?.sample(loc))
}
