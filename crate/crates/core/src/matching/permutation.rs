use crate::map_model::PolylineKind;

/// Point reorderings that trace the same geometric curve.
///
/// Open curves: identity and reversal. Closed curves: every cyclic shift in
/// both directions, `2n` elements. Element 0 is always the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationGroup {
    kind: PolylineKind,
    n: usize,
    elements: Vec<Vec<usize>>,
}

impl PermutationGroup {
    pub fn new(kind: PolylineKind, n: usize) -> Self {
        let elements = match kind {
            PolylineKind::Open => vec![(0..n).collect(), (0..n).rev().collect()],
            PolylineKind::Closed => {
                let mut e = Vec::with_capacity(2 * n);
                for shift in 0..n {
                    e.push((0..n).map(|j| (shift + j) % n).collect());
                }
                for shift in 0..n {
                    e.push((0..n).map(|j| (shift + n - j) % n).collect());
                }
                e
            }
        };
        Self { kind, n, elements }
    }

    pub fn kind(&self) -> PolylineKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }
}

/// Index of point `j` under group element `g` without materializing the group.
#[inline]
pub(crate) fn permuted_index(kind: PolylineKind, n: usize, g: usize, j: usize) -> usize {
    match kind {
        PolylineKind::Open => {
            if g == 0 {
                j
            } else {
                n - 1 - j
            }
        }
        PolylineKind::Closed => {
            if g < n {
                (g + j) % n
            } else {
                (g - n + n - j % n) % n
            }
        }
    }
}

#[inline]
pub(crate) fn group_size(kind: PolylineKind, n: usize) -> usize {
    match kind {
        PolylineKind::Open => 2,
        PolylineKind::Closed => 2 * n,
    }
}
