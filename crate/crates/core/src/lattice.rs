//! Lattice points and axis-aligned boxes on Z^d.

use std::fmt;

use smallvec::SmallVec;

use crate::error::SandpileError;

pub type Coords = SmallVec<[i64; 4]>;

/// A cell of Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatticePoint(Coords);

impl LatticePoint {
    pub fn new(coords: &[i64]) -> Self {
        assert!(
            !coords.is_empty(),
            "lattice points need at least one coordinate"
        );
        LatticePoint(coords.iter().copied().collect())
    }

    pub fn origin(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be at least 1");
        LatticePoint(SmallVec::from_elem(0, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Returns this point shifted by `delta` along `axis`.
    pub fn shifted(&self, axis: usize, delta: i64) -> Self {
        let mut c = self.0.clone();
        c[axis] += delta;
        LatticePoint(c)
    }

    pub fn linf_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).sum()
    }

    /// The 2d lattice neighbours, ordered axis by axis, minus before plus.
    pub fn neighbors(&self) -> Vec<LatticePoint> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            out.push(self.shifted(axis, -1));
            out.push(self.shifted(axis, 1));
        }
        out
    }
}

impl From<(i64, i64)> for LatticePoint {
    fn from((x, y): (i64, i64)) -> Self {
        LatticePoint::new(&[x, y])
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

pub fn neighbors(p: &LatticePoint) -> Vec<LatticePoint> {
    p.neighbors()
}

/// Non-empty axis-aligned box with inclusive bounds. Axis 0 varies fastest
/// in the dense layouts built on top of it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    lo: Coords,
    hi: Coords,
}

impl BoundingBox {
    pub fn new(lo: &[i64], hi: &[i64]) -> Result<Self, SandpileError> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(SandpileError::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Err(SandpileError::Parse(format!(
                "empty box: lo {lo:?} exceeds hi {hi:?}"
            )));
        }
        Ok(BoundingBox {
            lo: lo.iter().copied().collect(),
            hi: hi.iter().copied().collect(),
        })
    }

    /// The single-cell box at the origin.
    pub fn origin(dim: usize) -> Self {
        Self::centered(dim, 0)
    }

    /// `{p : max_i |p_i| <= half}`.
    pub fn centered(dim: usize, half: i64) -> Self {
        assert!(dim >= 1 && half >= 0);
        BoundingBox {
            lo: SmallVec::from_elem(-half, dim),
            hi: SmallVec::from_elem(half, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn shape(&self) -> Vec<usize> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l + 1) as usize)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        p.dim() == self.dim()
            && p.coords()
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|a| self.lo[a] <= other.lo[a] && other.hi[a] <= self.hi[a])
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        assert_eq!(self.dim(), other.dim());
        BoundingBox {
            lo: self
                .lo
                .iter()
                .zip(&other.lo)
                .map(|(a, b)| *a.min(b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(&other.hi)
                .map(|(a, b)| *a.max(b))
                .collect(),
        }
    }

    /// Smallest box containing `self` and `p`.
    pub fn including(&self, p: &LatticePoint) -> BoundingBox {
        assert_eq!(self.dim(), p.dim());
        BoundingBox {
            lo: self
                .lo
                .iter()
                .zip(p.coords())
                .map(|(a, b)| *a.min(b))
                .collect(),
            hi: self
                .hi
                .iter()
                .zip(p.coords())
                .map(|(a, b)| *a.max(b))
                .collect(),
        }
    }

    /// Grows every side by `by` cells.
    pub fn padded(&self, by: i64) -> BoundingBox {
        BoundingBox {
            lo: self.lo.iter().map(|l| l - by).collect(),
            hi: self.hi.iter().map(|h| h + by).collect(),
        }
    }

    pub fn strides(&self) -> Vec<usize> {
        let shape = self.shape();
        let mut strides = Vec::with_capacity(shape.len());
        let mut s = 1usize;
        for extent in shape {
            strides.push(s);
            s *= extent;
        }
        strides
    }

    pub fn index_of(&self, p: &LatticePoint) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut idx = 0usize;
        let mut stride = 1usize;
        for a in 0..self.dim() {
            idx += (p.coords()[a] - self.lo[a]) as usize * stride;
            stride *= (self.hi[a] - self.lo[a] + 1) as usize;
        }
        Some(idx)
    }

    pub fn point_at(&self, mut idx: usize) -> LatticePoint {
        let mut c = Coords::with_capacity(self.dim());
        for a in 0..self.dim() {
            let extent = (self.hi[a] - self.lo[a] + 1) as usize;
            c.push(self.lo[a] + (idx % extent) as i64);
            idx /= extent;
        }
        LatticePoint(c)
    }

    /// Points in storage order (axis 0 fastest).
    pub fn points(&self) -> impl Iterator<Item = LatticePoint> {
        let b = self.clone();
        (0..b.len()).map(move |i| b.point_at(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<LatticePoint>) -> Vec<LatticePoint> {
        v.sort();
        v
    }

    #[test]
    fn neighbors_of_origin_in_the_plane() {
        let got = sorted(neighbors(&LatticePoint::origin(2)));
        let want = sorted(vec![
            (0, -1).into(),
            (0, 1).into(),
            (-1, 0).into(),
            (1, 0).into(),
        ]);
        assert_eq!(got, want);
    }

    #[test]
    fn neighbors_translate() {
        let got = sorted(neighbors(&(2, -3).into()));
        let want = sorted(vec![
            (2, -4).into(),
            (2, -2).into(),
            (1, -3).into(),
            (3, -3).into(),
        ]);
        assert_eq!(got, want);
    }

    #[test]
    fn neighbors_in_three_dimensions() {
        let got = neighbors(&LatticePoint::origin(3));
        assert_eq!(got.len(), 6);
        for q in &got {
            assert_eq!(q.l1_norm(), 1);
        }
        let mut uniq = got.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), 6);
    }

    #[test]
    fn index_round_trip() {
        let b = BoundingBox::new(&[-2, 3, 0], &[1, 5, 2]).unwrap();
        assert_eq!(b.len(), 4 * 3 * 3);
        for i in 0..b.len() {
            let p = b.point_at(i);
            assert!(b.contains(&p));
            assert_eq!(b.index_of(&p), Some(i));
        }
        assert_eq!(b.index_of(&LatticePoint::new(&[2, 3, 0])), None);
    }

    #[test]
    fn rejects_inverted_box() {
        assert!(BoundingBox::new(&[1], &[0]).is_err());
        assert!(BoundingBox::new(&[0, 0], &[1]).is_err());
    }
}
