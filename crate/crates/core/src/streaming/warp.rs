use rayon::prelude::*;

use super::bev::BevGrid;
use crate::map_model::RigidTransform;
use crate::scalar::Scalar;

/// Re-expresses the previous frame's raster in the current ego frame.
///
/// `t` maps previous-frame coordinates into the current frame, so each output
/// cell at `x` reads the input bilinearly at `t⁻¹·x`. Preimages outside the
/// input extent read zero.
pub fn warp_bev<T: Scalar>(f: &BevGrid<T>, t: &RigidTransform<T>) -> BevGrid<T> {
    let (h, w, c) = f.shape();
    let inv = t.inverse();
    let mut out = BevGrid::zeros(h, w, c, *f.range());
    out.data_mut().par_chunks_mut(w * c).enumerate().for_each(|(i, row)| {
        for j in 0..w {
            let src = inv.apply(f.cell_center(i, j));
            let (fi, fj) = f.fractional_index(src);
            f.accumulate_bilinear(fi, fj, T::one(), &mut row[j * c..(j + 1) * c]);
        }
    });
    out
}
