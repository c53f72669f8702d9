//! Finite deviations from a uniform background on Z^d.

use std::fmt::Write as _;

use crate::error::{Result, SandpileError};
use crate::grid::DenseGrid;
use crate::lattice::{BoundingBox, LatticePoint};

/// Particle counts on Z^d: a dense box of heights over a uniform background.
///
/// Every cell outside the box holds exactly `background` particles and the
/// box always contains the origin.
#[derive(Clone, Debug)]
pub struct SandpileConfig {
    grid: DenseGrid<u64>,
}

impl SandpileConfig {
    /// Uniform configuration with `background` particles in every cell.
    pub fn uniform(dim: usize, background: u64) -> Self {
        SandpileConfig {
            grid: DenseGrid::filled(BoundingBox::origin(dim), background),
        }
    }

    /// Builds a configuration from explicit heights; the box is widened to
    /// contain the origin if necessary.
    pub fn from_heights(bbox: BoundingBox, background: u64, heights: Vec<u64>) -> Result<Self> {
        if bbox.len() != heights.len() {
            return Err(SandpileError::InvalidInput(format!(
                "box holds {} cells but {} heights were given",
                bbox.len(),
                heights.len()
            )));
        }
        let mut grid = DenseGrid::from_raw(bbox, heights, background);
        let origin = LatticePoint::origin(grid.dim());
        let with_origin = grid.bbox().including(&origin);
        grid.resize(with_origin);
        Ok(SandpileConfig { grid })
    }

    pub(crate) fn from_grid(grid: DenseGrid<u64>) -> Self {
        debug_assert!(grid.bbox().contains(&LatticePoint::origin(grid.dim())));
        SandpileConfig { grid }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn background(&self) -> u64 {
        self.grid.fill()
    }

    pub fn bbox(&self) -> &BoundingBox {
        self.grid.bbox()
    }

    /// Raw heights over `bbox()`, axis 0 fastest.
    pub fn heights(&self) -> &[u64] {
        self.grid.data()
    }

    pub fn height(&self, p: &LatticePoint) -> u64 {
        self.grid.get(p)
    }

    /// Toppling threshold 2d.
    pub fn threshold(&self) -> u64 {
        2 * self.dim() as u64
    }

    pub fn set_height(&mut self, p: &LatticePoint, h: u64) {
        *self.grid.get_mut(p) = h;
    }

    pub fn add_at(&mut self, p: &LatticePoint, k: u64) {
        *self.grid.get_mut(p) += k;
    }

    /// Widens the explicit box; cell values are unchanged.
    pub fn expand_to(&mut self, bbox: &BoundingBox) {
        let target = self.bbox().union(bbox);
        self.grid.resize(target);
    }

    pub fn is_stable(&self) -> bool {
        let t = self.threshold();
        self.background() < t && self.heights().iter().all(|&h| h < t)
    }

    pub fn max_height(&self) -> u64 {
        self.heights()
            .iter()
            .copied()
            .max()
            .unwrap_or(0)
            .max(self.background())
    }

    /// Total particles in the finite box `b` (cells outside the explicit
    /// box count as background).
    pub fn particles_in(&self, b: &BoundingBox) -> u128 {
        b.points().map(|p| self.height(&p) as u128).sum()
    }

    /// Cells whose height differs from the background, in storage order.
    pub fn deviations(&self) -> impl Iterator<Item = (LatticePoint, u64)> + '_ {
        let bg = self.background();
        self.grid.iter().filter(move |(_, h)| *h != bg)
    }

    /// Parses the fixture format: `d h`, then `lo hi` pairs per axis, then
    /// heights with axis 0 fastest.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace().map(|t| {
            t.parse::<i64>()
                .map_err(|e| SandpileError::Parse(format!("bad integer {t:?}: {e}")))
        });
        let mut next = |what: &str| -> Result<i64> {
            tokens.next().ok_or_else(|| {
                SandpileError::Parse(format!("unexpected end of input, expected {what}"))
            })?
        };
        let dim = next("dimension")?;
        if dim < 1 {
            return Err(SandpileError::Parse(format!(
                "dimension must be positive, got {dim}"
            )));
        }
        let background = next("background")?;
        if background < 0 {
            return Err(SandpileError::Parse(
                "background must be non-negative".into(),
            ));
        }
        let dim = dim as usize;
        let mut lo = Vec::with_capacity(dim);
        let mut hi = Vec::with_capacity(dim);
        for _ in 0..dim {
            lo.push(next("box lower bound")?);
            hi.push(next("box upper bound")?);
        }
        let bbox = BoundingBox::new(&lo, &hi)?;
        let mut heights = Vec::with_capacity(bbox.len());
        for _ in 0..bbox.len() {
            let h = next("height")?;
            if h < 0 {
                return Err(SandpileError::Parse(format!("negative height {h}")));
            }
            heights.push(h as u64);
        }
        if tokens.next().is_some() {
            return Err(SandpileError::Parse("trailing data after heights".into()));
        }
        Self::from_heights(bbox, background as u64, heights)
    }

    /// Renders the fixture format, one axis-0 row per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let b = self.bbox();
        writeln!(out, "{} {}", self.dim(), self.background()).unwrap();
        let bounds: Vec<String> = (0..self.dim())
            .map(|a| format!("{} {}", b.lo()[a], b.hi()[a]))
            .collect();
        writeln!(out, "{}", bounds.join(" ")).unwrap();
        let row = b.shape()[0];
        for chunk in self.heights().chunks(row) {
            let line: Vec<String> = chunk.iter().map(u64::to_string).collect();
            writeln!(out, "{}", line.join(" ")).unwrap();
        }
        out
    }
}

/// Cell-by-cell equality, independent of how large each explicit box is.
impl PartialEq for SandpileConfig {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_values(&other.grid)
    }
}

impl Eq for SandpileConfig {}

/// `n` particles at the origin on ground level `h`.
pub fn make_point_source(n: u64, h: u64, dim: usize) -> SandpileConfig {
    let mut c = SandpileConfig::uniform(dim, h);
    c.set_height(&LatticePoint::origin(dim), n);
    c
}

/// `S_r = {p : max_i |p_i| <= r - 1}`; empty for r = 0.
pub fn square(dim: usize, r: u64) -> Option<BoundingBox> {
    (r > 0).then(|| BoundingBox::centered(dim, r as i64 - 1))
}

/// `S_r1` filled with 2d, `S_r2 \ S_r1` filled with 2d-1, ground `h` elsewhere.
pub fn make_square_config(r1: u64, r2: u64, h: u64, dim: usize) -> Result<SandpileConfig> {
    if r1 > r2 {
        return Err(SandpileError::InvalidRadii { r1, r2 });
    }
    let full = 2 * dim as u64;
    let mut c = SandpileConfig::uniform(dim, h);
    if let Some(outer) = square(dim, r2) {
        c.expand_to(&outer);
        let b = c.bbox().clone();
        let inner_half = r1 as i64 - 1;
        for (i, p) in b.points().enumerate() {
            let norm = p.linf_norm();
            c.grid.data_mut()[i] = if norm <= inner_half { full } else { full - 1 };
        }
    }
    Ok(c)
}

/// True iff `a` holds at most as many particles as `b` in every cell.
pub fn config_leq(a: &SandpileConfig, b: &SandpileConfig) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(SandpileError::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a.background() > b.background() {
        return Ok(false);
    }
    let union = a.bbox().union(b.bbox());
    Ok(union.points().all(|p| a.height(&p) <= b.height(&p)))
}

/// Adds `k` particles to every cell of Z^d.
pub fn add_everywhere(c: &SandpileConfig, k: u64) -> SandpileConfig {
    let (bbox, mut data, fill) = c.grid.clone().into_raw();
    for h in &mut data {
        *h += k;
    }
    SandpileConfig {
        grid: DenseGrid::from_raw(bbox, data, fill + k),
    }
}
