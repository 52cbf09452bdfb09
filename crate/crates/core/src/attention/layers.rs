use super::sampling::Sampler;
use crate::error::{Error, Result};
use crate::linalg::{softmax, Linear, Mlp};
use crate::map_model::Point2;
use crate::rng::XorShift64Star;
use crate::scalar::{inverse_sigmoid, sigmoid, Scalar};

/// Single-reference deformable layer: `n_off` offsets around one point,
/// refined by a per-layer residual regression in logit space.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineLayerWeights<T> {
    /// `D → 2·n_off`
    pub offset: Linear<T>,
    /// `D → n_off`
    pub weight: Linear<T>,
    /// `D → 2`
    pub reg: Linear<T>,
}

impl<T: Scalar> BaselineLayerWeights<T> {
    pub fn random(d: usize, n_off: usize, rng: &mut XorShift64Star) -> Self {
        Self {
            offset: Linear::random(d, 2 * n_off, true, rng),
            weight: Linear::random(d, n_off, true, rng),
            reg: Linear::random(d, 2, true, rng),
        }
    }

    pub fn n_off(&self) -> usize {
        self.weight.out_dim
    }
}

pub fn baseline_layer<T: Scalar>(
    q: &[T],
    reference: Point2<T>,
    sampler: &Sampler<'_, T>,
    w: &BaselineLayerWeights<T>,
) -> Result<(Vec<T>, Point2<T>)> {
    w.offset.check_input(q.len())?;
    let n_off = w.n_off();
    if w.offset.out_dim != 2 * n_off || w.reg.out_dim != 2 || w.reg.in_dim != sampler.out_dim() {
        return Err(Error::ShapeMismatch("baseline layer heads do not agree".into()));
    }
    let offsets = w.offset.forward(q);
    let weights = softmax(&w.weight.forward(q));
    let mut raw = sampler.raw_accumulator();
    for k in 0..n_off {
        let loc = Point2::new(reference.x + offsets[2 * k], reference.y + offsets[2 * k + 1]);
        sampler.accumulate(loc, weights[k], &mut raw);
    }
    let q_out = sampler.project(&raw);
    let delta = w.reg.forward(&q_out);
    let refined = Point2::new(
        sigmoid(inverse_sigmoid(reference.x) + delta[0]),
        sigmoid(inverse_sigmoid(reference.y) + delta[1]),
    );
    Ok((q_out, refined))
}

/// Multi-point attention maps of one layer: offsets and weights for
/// `n_p · n_off` slots. Slot `j·n_off + k` belongs to point `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpaLayerWeights<T> {
    /// `D → 2·n_p·n_off`, `(dx, dy)` pairs per slot.
    pub offset: Linear<T>,
    /// `D → n_p·n_off`
    pub weight: Linear<T>,
}

impl<T: Scalar> MpaLayerWeights<T> {
    pub fn random(d: usize, n_p: usize, n_off: usize, rng: &mut XorShift64Star) -> Self {
        Self {
            offset: Linear::random(d, 2 * n_p * n_off, true, rng),
            weight: Linear::random(d, n_p * n_off, true, rng),
        }
    }

    pub fn zeros(d: usize, n_p: usize, n_off: usize) -> Self {
        Self { offset: Linear::zeros(d, 2 * n_p * n_off, true), weight: Linear::zeros(d, n_p * n_off, true) }
    }

    pub fn slots(&self) -> usize {
        self.weight.out_dim
    }
}

/// Attention output of one multi-point layer: a convex combination of
/// samples around every current point, weights softmax-normalized over all
/// slots jointly.
pub fn mpa_attend<T: Scalar>(
    q: &[T],
    points: &[Point2<T>],
    sampler: &Sampler<'_, T>,
    w: &MpaLayerWeights<T>,
) -> Result<Vec<T>> {
    w.offset.check_input(q.len())?;
    w.weight.check_input(q.len())?;
    let slots = w.slots();
    if points.is_empty() || slots % points.len() != 0 || w.offset.out_dim != 2 * slots {
        return Err(Error::PointCountMismatch { left: points.len(), right: slots });
    }
    let n_off = slots / points.len();
    let offsets = w.offset.forward(q);
    let weights = softmax(&w.weight.forward(q));
    let mut raw = sampler.raw_accumulator();
    for (j, p) in points.iter().enumerate() {
        for k in 0..n_off {
            let s = j * n_off + k;
            let loc = Point2::new(p.x + offsets[2 * s], p.y + offsets[2 * s + 1]);
            sampler.accumulate(loc, weights[s], &mut raw);
        }
    }
    Ok(sampler.project(&raw))
}

/// Regressed polyline: absolute unit-square coordinates, `sigmoid(Reg(q))`.
pub fn regress_points<T: Scalar>(q: &[T], reg: &Mlp<T>) -> Result<Vec<Point2<T>>> {
    reg.hidden.check_input(q.len())?;
    let out = reg.forward(q);
    if out.len() % 2 != 0 {
        return Err(Error::ShapeMismatch(format!("regression head emits {} values", out.len())));
    }
    Ok(out.chunks_exact(2).map(|c| Point2::new(sigmoid(c[0]), sigmoid(c[1]))).collect())
}

/// One multi-point layer without the surrounding transformer sub-blocks.
pub fn mpa_layer<T: Scalar>(
    q: &[T],
    points: &[Point2<T>],
    sampler: &Sampler<'_, T>,
    w: &MpaLayerWeights<T>,
    reg: &Mlp<T>,
) -> Result<(Vec<T>, Vec<Point2<T>>)> {
    let q_out = mpa_attend(q, points, sampler, w)?;
    let p_out = regress_points(&q_out, reg)?;
    Ok((q_out, p_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_model::PerceptionRange;
    use crate::streaming::BevGrid;

    fn setup(c: usize) -> (BevGrid<f64>, Linear<f64>) {
        let r = PerceptionRange::new(30.0, 15.0).unwrap();
        (BevGrid::from_fn(8, 6, c, r, |_, _, _| 0.625), Linear::identity(c))
    }

    #[test]
    fn constant_field_is_preserved() {
        let (g, v) = setup(4);
        let s = Sampler::new(&g, &v).unwrap();
        let mut rng = XorShift64Star::new(5);
        let w = MpaLayerWeights::random(4, 3, 2, &mut rng);
        // small offsets keep every site inside the raster
        let w = MpaLayerWeights {
            offset: Linear { weight: w.offset.weight.iter().map(|x| x * 0.01).collect(), bias: None, ..w.offset },
            ..w
        };
        let pts = vec![Point2::new(0.3, 0.4), Point2::new(0.5, 0.5), Point2::new(0.7, 0.2)];
        let out = mpa_attend(&[0.1, -0.2, 0.3, 0.05], &pts, &s, &w).unwrap();
        for v in out {
            assert!((v - 0.625).abs() < 1e-12);
        }
        assert_eq!(s.sites(), 6);
    }

    #[test]
    fn point_count_checked() {
        let (g, v) = setup(2);
        let s = Sampler::new(&g, &v).unwrap();
        let w = MpaLayerWeights::<f64>::zeros(2, 3, 1);
        assert!(mpa_attend(&[0.0, 0.0], &[Point2::new(0.5, 0.5); 2], &s, &w).is_err());
    }

    #[test]
    fn zero_regression_keeps_reference() {
        let (g, v) = setup(2);
        let s = Sampler::new(&g, &v).unwrap();
        let w = BaselineLayerWeights {
            offset: Linear::zeros(2, 2, true),
            weight: Linear::zeros(2, 1, true),
            reg: Linear::zeros(2, 2, true),
        };
        let r = Point2::new(0.3, 0.8);
        let (q, p) = baseline_layer(&[1.0, 2.0], r, &s, &w).unwrap();
        assert_eq!(q, s.sample(r));
        assert!((p.x - 0.3).abs() < 1e-9 && (p.y - 0.8).abs() < 1e-9);
    }
}
