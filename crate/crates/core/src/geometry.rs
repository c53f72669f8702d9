//! Toppled and visited clusters and the geometric predicates used on them.

use std::fmt::Write as _;

use crate::config::SandpileConfig;
use crate::engine::StabilizationResult;
use crate::error::{Result, SandpileError};
use crate::grid::DenseGrid;
use crate::lattice::{BoundingBox, LatticePoint};

/// Finite set of cells, stored as a bitmap over a bounding box.
#[derive(Clone, Debug)]
pub struct Cluster {
    cells: DenseGrid<bool>,
    count: usize,
}

impl Cluster {
    pub fn empty(dim: usize) -> Self {
        Cluster {
            cells: DenseGrid::filled(BoundingBox::origin(dim), false),
            count: 0,
        }
    }

    pub fn from_points<'a>(dim: usize, points: impl IntoIterator<Item = &'a LatticePoint>) -> Self {
        let mut c = Cluster::empty(dim);
        for p in points {
            c.insert(p);
        }
        c
    }

    /// Every cell of the box.
    pub fn solid(bbox: BoundingBox) -> Self {
        let count = bbox.len();
        Cluster {
            cells: DenseGrid::from_raw(bbox, vec![true; count], false),
            count,
        }
    }

    /// `S_r`, the square (cube) of radius r.
    pub fn square(dim: usize, r: u64) -> Self {
        match crate::config::square(dim, r) {
            Some(b) => Cluster::solid(b),
            None => Cluster::empty(dim),
        }
    }

    /// `D_r = {p : sum_i |p_i| <= r - 1}`.
    pub fn diamond(dim: usize, r: u64) -> Self {
        let mut c = Cluster::empty(dim);
        if r > 0 {
            let half = r as i64 - 1;
            let b = BoundingBox::centered(dim, half);
            c.cells = DenseGrid::filled(b.clone(), false);
            for p in b.points() {
                if p.l1_norm() <= half {
                    c.insert(&p);
                }
            }
        }
        c
    }

    fn from_bitmap(bbox: BoundingBox, bits: Vec<bool>) -> Self {
        let count = bits.iter().filter(|b| **b).count();
        Cluster {
            cells: DenseGrid::from_raw(bbox, bits, false),
            count,
        }
    }

    pub fn insert(&mut self, p: &LatticePoint) {
        let cell = self.cells.get_mut(p);
        if !*cell {
            *cell = true;
            self.count += 1;
        }
    }

    pub fn dim(&self) -> usize {
        self.cells.dim()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, p: &LatticePoint) -> bool {
        self.cells.get(p)
    }

    /// Box the bitmap is stored over; contains every cell.
    pub fn storage_box(&self) -> &BoundingBox {
        self.cells.bbox()
    }

    /// Cells in storage order.
    pub fn iter(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        self.cells.iter().filter(|(_, b)| *b).map(|(p, _)| p)
    }

    /// Cells sorted lexicographically by coordinates.
    pub fn sorted_cells(&self) -> Vec<LatticePoint> {
        let mut cells: Vec<LatticePoint> = self.iter().collect();
        cells.sort();
        cells
    }

    pub fn is_subset(&self, other: &Cluster) -> bool {
        self.iter().all(|p| other.contains(&p))
    }

    pub fn union(&self, other: &Cluster) -> Cluster {
        let mut out = self.clone();
        for p in other.iter() {
            out.insert(&p);
        }
        out
    }

    /// Text export: `d count`, then one cell per line in lexicographic order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.dim(), self.len()).unwrap();
        for p in self.sorted_cells() {
            let coords: Vec<String> = p.coords().iter().map(i64::to_string).collect();
            writeln!(out, "{}", coords.join(" ")).unwrap();
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Cluster> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| SandpileError::Parse("missing cluster header".into()))?;
        let nums = parse_ints(header)?;
        let [dim, count] = nums[..] else {
            return Err(SandpileError::Parse(format!(
                "bad cluster header {header:?}"
            )));
        };
        if dim < 1 || count < 0 {
            return Err(SandpileError::Parse(format!(
                "bad cluster header {header:?}"
            )));
        }
        let mut c = Cluster::empty(dim as usize);
        let mut seen = 0;
        for line in lines {
            let coords = parse_ints(line)?;
            if coords.len() != dim as usize {
                return Err(SandpileError::DimensionMismatch {
                    expected: dim as usize,
                    found: coords.len(),
                });
            }
            c.insert(&LatticePoint::new(&coords));
            seen += 1;
        }
        if seen != count || c.len() as i64 != count {
            return Err(SandpileError::Parse(format!(
                "cluster header announces {count} cells, found {seen} lines / {} distinct",
                c.len()
            )));
        }
        Ok(c)
    }
}

fn parse_ints(line: &str) -> Result<Vec<i64>> {
    line.split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|e| SandpileError::Parse(format!("bad integer {t:?}: {e}")))
        })
        .collect()
}

/// Set equality, independent of storage boxes.
impl PartialEq for Cluster {
    fn eq(&self, other: &Self) -> bool {
        self.dim() == other.dim() && self.len() == other.len() && self.is_subset(other)
    }
}

impl Eq for Cluster {}

/// Cells toppled at least once.
pub fn toppled_cluster(r: &StabilizationResult) -> Cluster {
    let odo = &r.odometer;
    Cluster::from_bitmap(
        odo.bbox().clone(),
        odo.counts().iter().map(|&k| k > 0).collect(),
    )
}

/// Cells that toppled or received at least one particle, read off the
/// odometer's inflow.
pub fn visited_cluster(r: &StabilizationResult) -> Cluster {
    let odo = &r.odometer;
    let region = odo.bbox().padded(1);
    let bits = region
        .points()
        .map(|p| odo.get(&p) > 0 || odo.inflow(&p) > 0)
        .collect();
    Cluster::from_bitmap(region, bits)
}

/// Cells outside `c` with a lattice neighbour in `c`.
pub fn outer_boundary(c: &Cluster) -> Cluster {
    let mut out = Cluster::empty(c.dim());
    for p in c.iter() {
        for q in p.neighbors() {
            if !c.contains(&q) {
                out.insert(&q);
            }
        }
    }
    out
}

/// 0 for the empty set, else 1 + the largest L-infinity norm.
pub fn radius(c: &Cluster) -> u64 {
    c.iter()
        .map(|p| p.linf_norm() as u64 + 1)
        .max()
        .unwrap_or(0)
}

/// `Some(r)` iff `c` is exactly `S_r`.
pub fn match_square(c: &Cluster) -> Option<u64> {
    let r = radius(c);
    if r == 0 {
        return Some(0);
    }
    let side = 2 * r as usize - 1;
    (c.len() == side.pow(c.dim() as u32)).then_some(r)
}

/// True iff `D_r` is contained in `c`.
pub fn contains_diamond(c: &Cluster, r: u64) -> bool {
    if r == 0 {
        return true;
    }
    let half = r as i64 - 1;
    BoundingBox::centered(c.dim(), half)
        .points()
        .filter(|p| p.l1_norm() <= half)
        .all(|p| c.contains(&p))
}

/// Largest r with `D_r` contained in `c` (0 if the origin is missing).
pub fn largest_diamond(c: &Cluster) -> u64 {
    // D_r \ D_{r-1} is the L1 sphere of radius r - 1, so grow shell by shell
    let mut r = 0;
    loop {
        let shell = r as i64;
        let complete = BoundingBox::centered(c.dim(), shell)
            .points()
            .filter(|p| p.l1_norm() == shell)
            .all(|p| c.contains(&p));
        if !complete {
            return r;
        }
        r += 1;
    }
}

/// Unordered neighbour pairs inside `toppled` that both end with height 0.
pub fn adjacent_zero_pairs(final_config: &SandpileConfig, toppled: &Cluster) -> usize {
    toppled
        .iter()
        .filter(|p| final_config.height(p) == 0)
        .map(|p| {
            (0..p.dim())
                .map(|a| p.shifted(a, 1))
                .filter(|q| toppled.contains(q) && final_config.height(q) == 0)
                .count()
        })
        .sum()
}

/// Domino tiling of `D_r`: each row paired left to right from its leftmost
/// cell, odd leftovers dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DominoCount {
    /// Complete dominoes in the tiling.
    pub complete: u64,
    /// Dominoes holding at least one particle.
    pub occupied: u64,
}

pub fn domino_lower_bound(final_config: &SandpileConfig, r: u64) -> Result<DominoCount> {
    if final_config.dim() != 2 {
        return Err(SandpileError::UnsupportedDimension {
            required: 2,
            found: final_config.dim(),
        });
    }
    let mut count = DominoCount {
        complete: 0,
        occupied: 0,
    };
    if r == 0 {
        return Ok(count);
    }
    let half = r as i64 - 1;
    for y in -half..=half {
        let reach = half - y.abs();
        let mut x = -reach;
        while x < reach {
            count.complete += 1;
            let a = final_config.height(&(x, y).into());
            let b = final_config.height(&(x + 1, y).into());
            if a + b > 0 {
                count.occupied += 1;
            }
            x += 2;
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::make_point_source;
    use crate::engine::{stabilize, Strategy, DEFAULT_BUDGET};

    fn p(x: i64, y: i64) -> LatticePoint {
        (x, y).into()
    }

    fn run(n: u64, h: u64) -> StabilizationResult {
        stabilize(
            &make_point_source(n, h, 2),
            Strategy::BulkFifo,
            DEFAULT_BUDGET,
        )
        .unwrap()
    }

    #[test]
    fn clusters_of_a_single_toppling() {
        let r = run(4, 2);
        let toppled = toppled_cluster(&r);
        assert_eq!(toppled.sorted_cells(), vec![p(0, 0)]);
        let visited = visited_cluster(&r);
        assert_eq!(visited.len(), 5);
        assert_eq!(visited, toppled.union(&outer_boundary(&toppled)));
    }

    #[test]
    fn clusters_of_a_stable_start() {
        let r = run(3, 2);
        assert!(toppled_cluster(&r).is_empty());
        assert!(visited_cluster(&r).is_empty());
    }

    #[test]
    fn boundary_examples() {
        let origin = Cluster::square(2, 1);
        let mut want: Vec<LatticePoint> = p(0, 0).neighbors();
        want.sort();
        assert_eq!(outer_boundary(&origin).sorted_cells(), want);

        assert!(outer_boundary(&Cluster::empty(2)).is_empty());

        // enumerate neighbours of the 3x3 block by hand
        let ring = outer_boundary(&Cluster::square(2, 2));
        let mut expected = Cluster::empty(2);
        for t in -1..=1 {
            for q in [p(t, 2), p(t, -2), p(2, t), p(-2, t)] {
                expected.insert(&q);
            }
        }
        assert_eq!(ring.len(), 12);
        assert_eq!(ring, expected);
        assert!(!ring.contains(&p(2, 2)));
    }

    #[test]
    fn radius_examples() {
        assert_eq!(radius(&Cluster::empty(2)), 0);
        assert_eq!(radius(&Cluster::square(2, 1)), 1);
        assert_eq!(radius(&Cluster::from_points(2, &[p(2, -3)])), 4);
        for r in 1..8 {
            assert_eq!(radius(&Cluster::square(2, r)), r);
            assert_eq!(radius(&Cluster::diamond(2, r)), r);
            assert_eq!(radius(&Cluster::square(3, r)), r);
        }
    }

    #[test]
    fn square_matching() {
        assert_eq!(match_square(&Cluster::empty(2)), Some(0));
        assert_eq!(match_square(&Cluster::square(2, 1)), Some(1));
        assert_eq!(match_square(&Cluster::square(3, 4)), Some(4));
        let mut cut = Cluster::empty(2);
        for q in Cluster::square(2, 3).iter().filter(|q| *q != p(2, 2)) {
            cut.insert(&q);
        }
        assert_eq!(match_square(&cut), None);
        let shifted = Cluster::from_points(2, &[p(1, 0)]);
        assert_eq!(match_square(&shifted), None);
    }

    #[test]
    fn diamond_containment() {
        let c = Cluster::from_points(2, &[p(5, 5)]);
        assert!(contains_diamond(&c, 0));
        for r in 1..6 {
            assert!(contains_diamond(&Cluster::square(2, r), r));
            assert_eq!(largest_diamond(&Cluster::diamond(2, r)), r);
        }
        assert!(!contains_diamond(&Cluster::diamond(2, 3), 4));
        assert_eq!(largest_diamond(&Cluster::square(2, 3)), 3);
        assert_eq!(largest_diamond(&Cluster::empty(2)), 0);
    }

    #[test]
    fn zero_pairs_examples() {
        let r = run(4, 0);
        assert_eq!(
            adjacent_zero_pairs(&r.final_config, &toppled_cluster(&r)),
            0
        );
        let c = make_point_source(0, 0, 2);
        let both = Cluster::from_points(2, &[p(0, 0), p(1, 0)]);
        assert_eq!(adjacent_zero_pairs(&c, &both), 1);
    }

    #[test]
    fn domino_tilings_by_hand() {
        let zero = SandpileConfig::uniform(2, 0);
        assert_eq!(
            domino_lower_bound(&zero, 1).unwrap(),
            DominoCount {
                complete: 0,
                occupied: 0
            }
        );
        let full = SandpileConfig::uniform(2, 1);
        assert_eq!(
            domino_lower_bound(&full, 2).unwrap(),
            DominoCount {
                complete: 1,
                occupied: 1
            }
        );
        // rows of D_3 have 1, 3, 5, 3, 1 cells
        assert_eq!(domino_lower_bound(&full, 3).unwrap().complete, 4);
        let mut one = SandpileConfig::uniform(2, 0);
        one.set_height(&p(-1, 0), 1);
        assert_eq!(domino_lower_bound(&one, 2).unwrap().occupied, 1);
        one.set_height(&p(-1, 0), 0);
        one.set_height(&p(1, 0), 1);
        assert_eq!(domino_lower_bound(&one, 2).unwrap().occupied, 0);
        assert!(domino_lower_bound(&SandpileConfig::uniform(3, 0), 2).is_err());
    }

    #[test]
    fn cluster_text_round_trip() {
        let c = Cluster::diamond(2, 3);
        let text = c.to_text();
        assert!(text.starts_with("2 13\n-2 0\n-1 -1\n"));
        assert_eq!(Cluster::parse_text(&text).unwrap(), c);
        assert!(Cluster::parse_text("2 2\n0 0\n").is_err());
        assert!(Cluster::parse_text("2 1\n0 0 0\n").is_err());
    }
}
