use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{Linear, Mlp};
use crate::map_model::{PerceptionRange, Point2, Polyline, RigidTransform};
use crate::rng::XorShift64Star;
use crate::scalar::Scalar;
use crate::tensor_store::TensorStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueryOrigin {
    Fresh,
    Propagated,
}

/// A decoder query: embedding, confidence, and its polyline in unit-square
/// coordinates (which doubles as the reference points for the next layer).
#[derive(Debug, Clone, PartialEq)]
pub struct QueryState<T = f32> {
    pub embedding: Vec<T>,
    pub score: T,
    pub points: Vec<Point2<T>>,
    pub origin: QueryOrigin,
}

impl<T: Scalar> QueryState<T> {
    pub fn new(embedding: Vec<T>, score: T, points: Vec<Point2<T>>, origin: QueryOrigin) -> Result<Self> {
        if !(score >= T::zero() && score <= T::one()) {
            return Err(Error::InvalidArgument(format!("query score {score} outside [0, 1]")));
        }
        Ok(Self { embedding, score, points, origin })
    }

    pub fn dim(&self) -> usize {
        self.embedding.len()
    }
}

/// Applies `t` to every vertex (metric coordinates).
pub fn transform_polyline<T: Scalar>(p: &Polyline<T>, t: &RigidTransform<T>) -> Polyline<T> {
    p.map_points(|q| t.apply(q))
}

/// Residual latent transform `e' = φ(concat(e, flatten(T))) + e`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformMlpWeights<T> {
    pub mlp: Mlp<T>,
}

impl<T: Scalar> TransformMlpWeights<T> {
    pub fn zeros(d: usize) -> Self {
        Self { mlp: Mlp { hidden: Linear::zeros(d + 16, d, true), output: Linear::zeros(d, d, true) } }
    }

    pub fn random(d: usize, rng: &mut XorShift64Star) -> Self {
        Self { mlp: Mlp { hidden: Linear::random(d + 16, d, true, rng), output: Linear::random(d, d, true, rng) } }
    }

    pub fn dim(&self) -> usize {
        self.mlp.out_dim()
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.mlp.in_dim() != d + 16 || self.mlp.hidden.out_dim != self.mlp.output.in_dim {
            return Err(Error::ShapeMismatch(format!(
                "transform MLP must map {} -> {d}, has input {}",
                d + 16,
                self.mlp.in_dim()
            )));
        }
        Ok(())
    }

    pub fn apply(&self, embedding: &[T], t: &RigidTransform<T>) -> Result<Vec<T>> {
        if embedding.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: embedding.len() });
        }
        let mut input = embedding.to_vec();
        input.extend_from_slice(&t.flatten());
        let mut out = self.mlp.forward(&input);
        for (o, e) in out.iter_mut().zip(embedding) {
            *o += *e;
        }
        Ok(out)
    }

    pub fn to_store(&self, store: &mut TensorStore, prefix: &str) {
        store.put_mlp(prefix, &self.mlp);
    }

    pub fn from_store(store: &TensorStore, prefix: &str, d: usize) -> Result<Self> {
        Ok(Self { mlp: store.mlp(prefix, d + 16, d, d)? })
    }
}

/// Carries the previous frame's queries into the current frame: latent
/// residual update plus exact geometric re-expression of the polylines.
pub fn transform_queries<T: Scalar>(
    queries: &[QueryState<T>],
    t: &RigidTransform<T>,
    w: &TransformMlpWeights<T>,
    range: &PerceptionRange<T>,
) -> Result<Vec<QueryState<T>>> {
    w.validate()?;
    queries
        .iter()
        .map(|q| {
            let points = q
                .points
                .iter()
                .map(|p| range.normalize_point(t.apply(range.denormalize_point(*p))))
                .collect();
            Ok(QueryState {
                embedding: w.apply(&q.embedding, t)?,
                score: q.score,
                points,
                origin: QueryOrigin::Propagated,
            })
        })
        .collect()
}

/// Indices of the `n` best-scoring queries, descending, ties by position.
fn top_indices<T: Scalar>(qs: &[QueryState<T>], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..qs.len()).collect();
    idx.sort_by(|&a, &b| qs[b].score.partial_cmp(&qs[a].score).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

/// Top `k` propagated queries followed by the best fresh queries, `n_q` in total.
/// With no propagated queries the best `n_q` fresh queries are returned.
pub fn select_and_merge<T: Scalar>(
    prev: &[QueryState<T>],
    fresh: &[QueryState<T>],
    k: usize,
    n_q: usize,
) -> Result<Vec<QueryState<T>>> {
    if k > n_q {
        return Err(Error::InvalidArgument(format!("cannot keep {k} propagated queries out of {n_q}")));
    }
    let keep = k.min(prev.len());
    let need = n_q - keep;
    if fresh.len() < need {
        return Err(Error::InvalidArgument(format!("need {need} fresh queries, got {}", fresh.len())));
    }
    let mut out: Vec<QueryState<T>> = top_indices(prev, keep).into_iter().map(|i| prev[i].clone()).collect();
    out.extend(top_indices(fresh, need).into_iter().map(|i| fresh[i].clone()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(score: f64, tag: f64) -> QueryState<f64> {
        QueryState::new(vec![tag], score, vec![Point2::new(0.5, 0.5)], QueryOrigin::Fresh).unwrap()
    }

    #[test]
    fn polyline_transforms() {
        let p = Polyline::from_xy(&[(1.0, 0.0), (2.0, 3.0)], crate::map_model::PolylineKind::Open).unwrap();
        assert_eq!(transform_polyline(&p, &RigidTransform::identity()), p);
        let shifted = transform_polyline(&p, &RigidTransform::translation(0.5, -2.0));
        assert_eq!(shifted.points()[1], Point2::new(2.5, 1.0));
        let rot = transform_polyline(&p, &RigidTransform::from_yaw_translation(std::f64::consts::FRAC_PI_2, 0.0, 0.0));
        assert!(rot.points()[0].dist(Point2::new(0.0, 1.0)) < 1e-12);
    }

    #[test]
    fn merge_order() {
        let prev = vec![q(0.9, 0.0), q(0.2, 1.0), q(0.8, 2.0)];
        let fresh = vec![q(0.7, 10.0), q(0.1, 11.0), q(0.75, 12.0), q(0.7, 13.0)];
        let out = select_and_merge(&prev, &fresh, 2, 4).unwrap();
        let tags: Vec<f64> = out.iter().map(|q| q.embedding[0]).collect();
        assert_eq!(tags, vec![0.0, 2.0, 12.0, 10.0]);
    }

    #[test]
    fn merge_edge_cases() {
        let fresh: Vec<_> = (0..5).map(|i| q(i as f64 / 10.0, i as f64)).collect();
        let first = select_and_merge(&[], &fresh, 2, 5).unwrap();
        assert_eq!(first.len(), 5);
        assert_eq!(first[0].embedding[0], 4.0);
        let k0 = select_and_merge(&fresh, &fresh, 0, 3).unwrap();
        assert_eq!(k0.iter().map(|q| q.embedding[0]).collect::<Vec<_>>(), vec![4.0, 3.0, 2.0]);
        assert!(select_and_merge(&fresh, &fresh, 6, 5).is_err());
        assert!(select_and_merge(&[], &fresh, 0, 6).is_err());
    }

    #[test]
    fn zero_mlp_is_pure_residual() {
        let range = PerceptionRange::new(30.0, 15.0).unwrap();
        let w = TransformMlpWeights::<f64>::zeros(3);
        let qs = vec![QueryState::new(vec![1.0, -2.0, 0.5], 0.4, vec![Point2::new(0.25, 0.75)], QueryOrigin::Fresh).unwrap()];
        let out = transform_queries(&qs, &RigidTransform::identity(), &w, &range).unwrap();
        assert_eq!(out[0].embedding, qs[0].embedding);
        assert_eq!(out[0].points, qs[0].points);
        assert_eq!(out[0].score, qs[0].score);
        assert_eq!(out[0].origin, QueryOrigin::Propagated);
        let bad = TransformMlpWeights::<f64>::zeros(4);
        assert!(transform_queries(&qs, &RigidTransform::identity(), &bad, &range).is_err());
    }

    #[test]
    fn propagated_geometry_moves_with_ego_motion() {
        // ego drove 3 m forward: a point 10 m ahead is now 7 m ahead
        let range = PerceptionRange::new(30.0, 15.0).unwrap();
        let prev_pose = RigidTransform::identity();
        let cur_pose = RigidTransform::translation(3.0, 0.0);
        let t = RigidTransform::relative(&prev_pose, &cur_pose);
        let p = range.normalize_point(Point2::new(10.0, 0.0));
        let qs = vec![QueryState::new(vec![0.0], 0.5, vec![p], QueryOrigin::Fresh).unwrap()];
        let out = transform_queries(&qs, &t, &TransformMlpWeights::zeros(1), &range).unwrap();
        let m = range.denormalize_point(out[0].points[0]);
        assert!(m.dist(Point2::new(7.0, 0.0)) < 1e-12);
    }
}
