use crate::grid::DenseGrid;
use crate::lattice::{BoundingBox, LatticePoint};

/// Per-cell toppling counts of one stabilization; zero outside the box.
#[derive(Clone, Debug)]
pub struct Odometer {
    grid: DenseGrid<u64>,
}

impl Odometer {
    pub fn zero(bbox: BoundingBox) -> Self {
        Odometer {
            grid: DenseGrid::filled(bbox, 0),
        }
    }

    pub(crate) fn from_grid(grid: DenseGrid<u64>) -> Self {
        debug_assert_eq!(grid.fill(), 0);
        Odometer { grid }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn bbox(&self) -> &BoundingBox {
        self.grid.bbox()
    }

    pub fn counts(&self) -> &[u64] {
        self.grid.data()
    }

    pub fn get(&self, p: &LatticePoint) -> u64 {
        self.grid.get(p)
    }

    pub fn add(&mut self, p: &LatticePoint, k: u64) {
        *self.grid.get_mut(p) += k;
    }

    pub fn total(&self) -> u64 {
        self.grid.data().iter().sum()
    }

    /// Cells with a positive count, in storage order.
    pub fn support(&self) -> impl Iterator<Item = (LatticePoint, u64)> + '_ {
        self.grid.iter().filter(|(_, k)| *k > 0)
    }

    /// Pointwise sum, e.g. for chaining partial stabilizations.
    pub fn sum(&self, other: &Odometer) -> Odometer {
        let mut out = self.clone();
        out.grid.resize(self.bbox().union(other.bbox()));
        for (p, k) in other.support() {
            out.add(&p, k);
        }
        out
    }

    /// True iff `self(p) <= other(p)` everywhere.
    pub fn leq(&self, other: &Odometer) -> bool {
        self.support().all(|(p, k)| k <= other.get(&p))
    }

    /// Number of particles cell `p` received from toppling neighbours.
    pub fn inflow(&self, p: &LatticePoint) -> u64 {
        p.neighbors().iter().map(|q| self.get(q)).sum()
    }
}

impl PartialEq for Odometer {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_values(&other.grid)
    }
}

impl Eq for Odometer {}
