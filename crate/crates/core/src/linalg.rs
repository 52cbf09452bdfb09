//! Small dense building blocks for the forward-only neural kernels.

use crate::error::{Error, Result};
use crate::rng::XorShift64Star;
use crate::scalar::Scalar;

/// Affine map `y = W x + b` with `W` stored row-major as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(in_dim: usize, out_dim: usize, weight: Vec<T>, bias: Option<Vec<T>>) -> Result<Self> {
        if weight.len() != in_dim * out_dim {
            return Err(Error::ShapeMismatch(format!(
                "linear weight has {} entries, expected {out_dim}x{in_dim}",
                weight.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != out_dim {
                return Err(Error::ShapeMismatch(format!(
                    "linear bias has {} entries, expected {out_dim}",
                    b.len()
                )));
            }
        }
        Ok(Self { in_dim, out_dim, weight, bias })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, with_bias: bool) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: with_bias.then(|| vec![T::zero(); out_dim]),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut l = Self::zeros(dim, dim, false);
        for i in 0..dim {
            l.weight[i * dim + i] = T::one();
        }
        l
    }

    /// Uniform in `±1/sqrt(in_dim)` for weights and bias.
    pub fn random(in_dim: usize, out_dim: usize, with_bias: bool, rng: &mut XorShift64Star) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let weight = (0..in_dim * out_dim).map(|_| T::lit(rng.uniform(-bound, bound))).collect();
        let bias = with_bias.then(|| (0..out_dim).map(|_| T::lit(rng.uniform(-bound, bound))).collect());
        Self { in_dim, out_dim, weight, bias }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.in_dim);
        let mut out = Vec::with_capacity(self.out_dim);
        for o in 0..self.out_dim {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.bias.as_ref().map_or(T::zero(), |b| b[o]);
            for (w, v) in row.iter().zip(x) {
                acc += *w * *v;
            }
            out.push(acc);
        }
        out
    }

    pub fn check_input(&self, len: usize) -> Result<()> {
        if len != self.in_dim {
            return Err(Error::DimensionMismatch { expected: self.in_dim, got: len });
        }
        Ok(())
    }
}

/// Two-layer perceptron with a rectified-linear hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub hidden: Linear<T>,
    pub output: Linear<T>,
}

impl<T: Scalar> Mlp<T> {
    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let h: Vec<T> = self.hidden.forward(x).into_iter().map(relu).collect();
        self.output.forward(&h)
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.output.out_dim
    }
}

#[inline]
pub fn relu<T: Scalar>(x: T) -> T {
    x.max(T::zero())
}

/// Per-vector affine normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm<T> {
    pub gain: Vec<T>,
    pub bias: Vec<T>,
    pub eps: T,
}

impl<T: Scalar> LayerNorm<T> {
    pub fn identity(dim: usize, eps: T) -> Self {
        Self { gain: vec![T::one(); dim], bias: vec![T::zero(); dim], eps }
    }

    pub fn dim(&self) -> usize {
        self.gain.len()
    }

    /// Population mean/variance over the vector, then gain and bias.
    pub fn apply_in_place(&self, x: &mut [T]) {
        let n = T::from_usize_lossy(x.len());
        let mean = x.iter().copied().sum::<T>() / n;
        let var = x.iter().map(|v| (*v - mean) * (*v - mean)).sum::<T>() / n;
        let inv = T::one() / (var + self.eps).sqrt();
        for (i, v) in x.iter_mut().enumerate() {
            *v = (*v - mean) * inv * self.gain[i] + self.bias[i];
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(x: &[T]) -> Vec<T> {
    let max = x.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = x.iter().map(|v| (*v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
