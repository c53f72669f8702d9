use crate::lattice::{BoundingBox, LatticePoint};

/// Dense array over a bounding box with a uniform fill value outside it.
#[derive(Clone, Debug)]
pub struct DenseGrid<T> {
    bbox: BoundingBox,
    data: Vec<T>,
    fill: T,
}

impl<T: Copy + PartialEq> DenseGrid<T> {
    pub fn filled(bbox: BoundingBox, fill: T) -> Self {
        let data = vec![fill; bbox.len()];
        DenseGrid { bbox, data, fill }
    }

    pub(crate) fn from_raw(bbox: BoundingBox, data: Vec<T>, fill: T) -> Self {
        assert_eq!(bbox.len(), data.len(), "data length must match box volume");
        DenseGrid { bbox, data, fill }
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    pub fn fill(&self) -> T {
        self.fill
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub(crate) fn into_raw(self) -> (BoundingBox, Vec<T>, T) {
        (self.bbox, self.data, self.fill)
    }

    pub fn get(&self, p: &LatticePoint) -> T {
        match self.bbox.index_of(p) {
            Some(i) => self.data[i],
            None => self.fill,
        }
    }

    /// Mutable access, growing the box to contain `p` first if needed.
    pub fn get_mut(&mut self, p: &LatticePoint) -> &mut T {
        if !self.bbox.contains(p) {
            let grown = self.bbox.including(p);
            self.resize(grown);
        }
        let i = self.bbox.index_of(p).expect("box was grown to contain p");
        &mut self.data[i]
    }

    /// Re-lays the grid over `bbox`, which must contain the current box.
    pub fn resize(&mut self, bbox: BoundingBox) {
        assert!(
            bbox.contains_box(&self.bbox),
            "resize may only grow the box"
        );
        if bbox == self.bbox {
            return;
        }
        let mut data = vec![self.fill; bbox.len()];
        let old = &self.bbox;
        let row = old.shape()[0];
        let rows = old.len() / row;
        let old_shape = old.shape();
        let new_strides = bbox.strides();
        let offsets: Vec<usize> = (0..old.dim())
            .map(|a| (old.lo()[a] - bbox.lo()[a]) as usize)
            .collect();
        for r in 0..rows {
            // r enumerates the old rows; decode axes 1.. of the row start
            let mut rest = r;
            let mut dst = offsets[0];
            for a in 1..old.dim() {
                let c = rest % old_shape[a];
                rest /= old_shape[a];
                dst += (c + offsets[a]) * new_strides[a];
            }
            data[dst..dst + row].copy_from_slice(&self.data[r * row..(r + 1) * row]);
        }
        self.data = data;
        self.bbox = bbox;
    }

    /// Cell-by-cell equality over the union of both boxes, fill included.
    pub fn same_values(&self, other: &DenseGrid<T>) -> bool {
        if self.dim() != other.dim() || self.fill != other.fill {
            return false;
        }
        if self.bbox == other.bbox {
            return self.data == other.data;
        }
        let union = self.bbox.union(&other.bbox);
        union.points().all(|p| self.get(&p) == other.get(&p))
    }

    /// Points in storage order together with their stored values.
    pub fn iter(&self) -> impl Iterator<Item = (LatticePoint, T)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.bbox.point_at(i), *v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_keeps_values() {
        let mut g = DenseGrid::filled(BoundingBox::centered(2, 1), 0u64);
        for (i, p) in g.bbox().clone().points().enumerate() {
            *g.get_mut(&p) = i as u64 + 1;
        }
        let before = g.clone();
        g.resize(BoundingBox::new(&[-3, -2], &[4, 1]).unwrap());
        assert!(g.same_values(&before));
        *g.get_mut(&LatticePoint::new(&[9, -9])) = 7;
        assert_eq!(g.get(&LatticePoint::new(&[9, -9])), 7);
        assert_eq!(g.get(&LatticePoint::new(&[-1, -1])), 1);
    }
}
