use rayon::prelude::*;

use super::bev::BevGrid;
use crate::error::{Error, Result};
use crate::linalg::{LayerNorm, Linear};
use crate::rng::XorShift64Star;
use crate::scalar::{sigmoid, Scalar};
use crate::tensor_store::TensorStore;

/// One gate: `W·x + U·h + b` with `C × C` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate<T> {
    /// Input transform, carries the bias.
    pub w: Linear<T>,
    pub u: Linear<T>,
}

impl<T: Scalar> Gate<T> {
    pub fn zeros(c: usize) -> Self {
        Self { w: Linear::zeros(c, c, true), u: Linear::zeros(c, c, false) }
    }

    pub fn random(c: usize, rng: &mut XorShift64Star) -> Self {
        Self { w: Linear::random(c, c, true, rng), u: Linear::random(c, c, false, rng) }
    }

    fn eval(&self, x: &[T], h: &[T]) -> Vec<T> {
        let mut a = self.w.forward(x);
        for (a, b) in a.iter_mut().zip(self.u.forward(h)) {
            *a += b;
        }
        a
    }

    pub fn bias_mut(&mut self) -> &mut Vec<T> {
        self.w.bias.get_or_insert_with(Vec::new)
    }

    fn check(&self, c: usize, name: &str) -> Result<()> {
        let ok = self.w.in_dim == c
            && self.w.out_dim == c
            && self.u.in_dim == c
            && self.u.out_dim == c
            && self.w.bias.as_ref().is_some_and(|b| b.len() == c);
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!("GRU {name} gate does not match {c} channels")))
        }
    }
}

/// Per-cell GRU shared across the raster, followed by an optional
/// per-cell layer norm. `norm: None` leaves the GRU output as is.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights<T> {
    pub update: Gate<T>,
    pub reset: Gate<T>,
    pub candidate: Gate<T>,
    pub norm: Option<LayerNorm<T>>,
}

pub const GRU_NORM_EPS: f64 = 1e-9;

impl<T: Scalar> GruWeights<T> {
    pub fn channels(&self) -> usize {
        self.update.w.in_dim
    }

    pub fn random(c: usize, rng: &mut XorShift64Star) -> Self {
        Self {
            update: Gate::random(c, rng),
            reset: Gate::random(c, rng),
            candidate: Gate::random(c, rng),
            norm: Some(LayerNorm::identity(c, T::lit(GRU_NORM_EPS))),
        }
    }

    pub fn validate(&self, c: usize) -> Result<()> {
        self.update.check(c, "update")?;
        self.reset.check(c, "reset")?;
        self.candidate.check(c, "candidate")?;
        if let Some(n) = &self.norm {
            if n.dim() != c || n.bias.len() != c {
                return Err(Error::ShapeMismatch(format!("GRU norm does not match {c} channels")));
            }
        }
        Ok(())
    }

    /// GRU update for one cell, before normalization.
    pub fn cell(&self, x: &[T], h: &[T]) -> Vec<T> {
        let z: Vec<T> = self.update.eval(x, h).into_iter().map(sigmoid).collect();
        let r: Vec<T> = self.reset.eval(x, h).into_iter().map(sigmoid).collect();
        let rh: Vec<T> = r.iter().zip(h).map(|(r, h)| *r * *h).collect();
        let mut cand = self.candidate.w.forward(x);
        for (a, b) in cand.iter_mut().zip(self.candidate.u.forward(&rh)) {
            *a = (*a + b).tanh();
        }
        (0..h.len()).map(|k| (T::one() - z[k]) * h[k] + z[k] * cand[k]).collect()
    }

    pub fn to_store(&self, store: &mut TensorStore, prefix: &str) {
        for (name, g) in [("update", &self.update), ("reset", &self.reset), ("candidate", &self.candidate)] {
            store.put_linear(&format!("{prefix}.{name}.w"), &g.w);
            store.put_linear(&format!("{prefix}.{name}.u"), &g.u);
        }
        if let Some(n) = &self.norm {
            store.put_layer_norm(&format!("{prefix}.norm"), n);
        }
    }

    /// Missing norm tensors mean the norm is bypassed.
    pub fn from_store(store: &TensorStore, prefix: &str, c: usize) -> Result<Self> {
        let gate = |name: &str| -> Result<Gate<T>> {
            Ok(Gate {
                w: store.linear(&format!("{prefix}.{name}.w"), c, c, true)?,
                u: store.linear(&format!("{prefix}.{name}.u"), c, c, false)?,
            })
        };
        let norm_prefix = format!("{prefix}.norm");
        let norm = if store.get(&format!("{norm_prefix}.gain")).is_ok() {
            Some(store.layer_norm(&norm_prefix, c, T::lit(GRU_NORM_EPS))?)
        } else {
            None
        };
        Ok(Self { update: gate("update")?, reset: gate("reset")?, candidate: gate("candidate")?, norm })
    }
}

/// Fuses the warped memory raster (hidden state) with the current raster (input).
pub fn gru_fuse<T: Scalar>(prev_warped: &BevGrid<T>, cur: &BevGrid<T>, w: &GruWeights<T>) -> Result<BevGrid<T>> {
    if !prev_warped.same_shape(cur) {
        return Err(Error::ShapeMismatch(format!(
            "cannot fuse BEV grids {:?} and {:?}",
            prev_warped.shape(),
            cur.shape()
        )));
    }
    let c = cur.channels();
    w.validate(c)?;
    let mut out = cur.clone();
    out.data_mut()
        .par_chunks_mut(c)
        .zip(prev_warped.data().par_chunks(c))
        .zip(cur.data().par_chunks(c))
        .for_each(|((o, h), x)| {
            let mut v = w.cell(x, h);
            if let Some(n) = &w.norm {
                n.apply_in_place(&mut v);
            }
            o.copy_from_slice(&v);
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::{PerceptionRange, RangePreset};

    fn grids(c: usize, seed: u64) -> (BevGrid<f64>, BevGrid<f64>) {
        let mut rng = XorShift64Star::new(seed);
        let r = PerceptionRange::preset(RangePreset::Short);
        let a = BevGrid::from_fn(3, 4, c, r, |_, _, _| rng.uniform(-1.0, 1.0));
        let b = BevGrid::from_fn(3, 4, c, r, |_, _, _| rng.uniform(-1.0, 1.0));
        (a, b)
    }

    #[test]
    fn closed_update_gate_keeps_memory() {
        let (h, x) = grids(5, 3);
        let mut w = GruWeights::<f64>::random(5, &mut XorShift64Star::new(9));
        w.norm = None;
        w.update.bias_mut().iter_mut().for_each(|b| *b = -60.0);
        let out = gru_fuse(&h, &x, &w).unwrap();
        for (a, b) in out.data().iter().zip(h.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn normalized_cells() {
        let (h, x) = grids(6, 4);
        let w = GruWeights::<f64>::random(6, &mut XorShift64Star::new(10));
        let out = gru_fuse(&h, &x, &w).unwrap();
        for cell in out.data().chunks(6) {
            let mean = cell.iter().sum::<f64>() / 6.0;
            let var = cell.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 6.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn shape_mismatch() {
        let (h, _) = grids(4, 1);
        let (_, x) = grids(5, 1);
        let w = GruWeights::<f64>::random(4, &mut XorShift64Star::new(1));
        assert!(gru_fuse(&h, &x, &w).is_err());
        let (h, x) = grids(5, 1);
        assert!(gru_fuse(&h, &x, &w).is_err());
    }

    #[test]
    fn store_roundtrip() {
        let w = GruWeights::<f32>::random(3, &mut XorShift64Star::new(2));
        let mut s = TensorStore::new();
        w.to_store(&mut s, "gru");
        assert_eq!(GruWeights::from_store(&s, "gru", 3).unwrap(), w);
        let mut bypass = w.clone();
        bypass.norm = None;
        let mut s = TensorStore::new();
        bypass.to_store(&mut s, "gru");
        assert_eq!(GruWeights::from_store(&s, "gru", 3).unwrap(), bypass);
    }
}
