//! Tile-decomposed stabilization with barrier super-steps.
//!
//! Z^d is cut into cubes of `side^d` cells. Tiles are created lazily when
//! particles first reach them, so the lattice is unbounded. In each
//! super-step every active tile stabilizes its own cells with bulk
//! topplings; particles that leave a tile are buffered per face and
//! delivered after the barrier. By the abelian property the final
//! configuration and odometer match any sequential order exactly.

use std::collections::{HashMap, VecDeque};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::config::SandpileConfig;
use crate::error::{Result, SandpileError};
use crate::grid::DenseGrid;
use crate::lattice::{BoundingBox, Coords};
use crate::odometer::Odometer;

use super::StabilizationResult;

/// Masks are u16 with two bits per axis.
const MAX_TILED_DIM: usize = 8;

/// How the tiles of one super-step are processed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Execution {
    /// Rayon fork-join over tiles; sequential when the `parallel` feature is off.
    Parallel,
    Sequential,
}

struct Layout {
    dim: usize,
    side: usize,
    threshold: u64,
    strides: Vec<usize>,
    /// Bit 2a: cell lies on the low face of axis a; bit 2a+1: high face.
    face_mask: Vec<u16>,
    /// Local index shift when an emission crosses face 2a+s.
    wrap: Vec<isize>,
}

impl Layout {
    fn new(dim: usize, side: usize, threshold: u64) -> Self {
        let volume = side.pow(dim as u32);
        let strides: Vec<usize> = (0..dim).map(|a| side.pow(a as u32)).collect();
        let face_mask = (0..volume)
            .map(|mut idx| {
                let mut mask = 0u16;
                for a in 0..dim {
                    let c = idx % side;
                    idx /= side;
                    if c == 0 {
                        mask |= 1 << (2 * a);
                    }
                    if c == side - 1 {
                        mask |= 1 << (2 * a + 1);
                    }
                }
                mask
            })
            .collect();
        let wrap = strides
            .iter()
            .flat_map(|&s| {
                let span = ((side - 1) * s) as isize;
                [span, -span]
            })
            .collect();
        Layout {
            dim,
            side,
            threshold,
            strides,
            face_mask,
            wrap,
        }
    }

    fn volume(&self) -> usize {
        self.face_mask.len()
    }

    fn tile_of(&self, p: &[i64]) -> Coords {
        p.iter().map(|c| c.div_euclid(self.side as i64)).collect()
    }

    fn tile_box(&self, coord: &[i64]) -> BoundingBox {
        let side = self.side as i64;
        let lo: Vec<i64> = coord.iter().map(|t| t * side).collect();
        let hi: Vec<i64> = coord.iter().map(|t| t * side + side - 1).collect();
        BoundingBox::new(&lo, &hi).expect("tile boxes are non-empty")
    }
}

struct Tile {
    coord: Coords,
    heights: Vec<u64>,
    odometer: Vec<u64>,
    queued: Vec<bool>,
    work: VecDeque<u32>,
    /// Emissions per face: (local index in the neighbouring tile, count).
    outbox: Vec<Vec<(u32, u64)>>,
    share: u64,
    toppled: u64,
}

impl Tile {
    fn new(coord: Coords, layout: &Layout, background: u64) -> Self {
        let volume = layout.volume();
        Tile {
            coord,
            heights: vec![background; volume],
            odometer: vec![0; volume],
            queued: vec![false; volume],
            work: VecDeque::new(),
            outbox: vec![Vec::new(); 2 * layout.dim],
            share: 0,
            toppled: 0,
        }
    }

    fn add(&mut self, idx: usize, k: u64, threshold: u64) {
        self.heights[idx] += k;
        if self.heights[idx] >= threshold && !self.queued[idx] {
            self.queued[idx] = true;
            self.work.push_back(idx as u32);
        }
    }

    /// Bulk-FIFO inside the tile, spending at most `self.share` topplings.
    fn relax(&mut self, layout: &Layout, audit: bool) {
        let threshold = layout.threshold;
        let mut share = self.share;
        let mut done = 0u64;
        while let Some(i) = self.work.pop_front() {
            let i = i as usize;
            self.queued[i] = false;
            let h = self.heights[i];
            if h < threshold {
                continue;
            }
            if share == 0 {
                self.queued[i] = true;
                self.work.push_front(i as u32);
                break;
            }
            let k = (h / threshold).min(share);
            if audit {
                assert!(
                    h >= k * threshold,
                    "illegal toppling in tile {:?}",
                    self.coord
                );
            }
            self.heights[i] = h - k * threshold;
            self.odometer[i] += k;
            share -= k;
            done += k;
            let mask = layout.face_mask[i];
            for (a, &stride) in layout.strides.iter().enumerate() {
                for s in 0..2 {
                    let face = 2 * a + s;
                    if mask & (1 << face) != 0 {
                        let target = i.wrapping_add_signed(layout.wrap[face]);
                        self.outbox[face].push((target as u32, k));
                    } else {
                        let j = if s == 0 { i - stride } else { i + stride };
                        self.add(j, k, threshold);
                    }
                }
            }
            if self.heights[i] >= threshold && !self.queued[i] {
                self.queued[i] = true;
                self.work.push_back(i as u32);
            }
        }
        self.toppled = done;
    }
}

pub(crate) fn stabilize_tiled(
    config: &SandpileConfig,
    tile_side: usize,
    budget: u64,
    execution: Execution,
    audit: bool,
) -> Result<StabilizationResult> {
    let dim = config.dim();
    if dim > MAX_TILED_DIM {
        return Err(SandpileError::UnsupportedDimension {
            required: MAX_TILED_DIM,
            found: dim,
        });
    }
    if tile_side < 2 {
        return Err(SandpileError::InvalidInput(format!(
            "tile side must be at least 2, got {tile_side}"
        )));
    }
    let threshold = config.threshold();
    let background = config.background();
    let layout = Layout::new(dim, tile_side, threshold);

    let mut tiles: Vec<Tile> = Vec::new();
    let mut slots: HashMap<Coords, usize> = HashMap::new();

    let bbox = config.bbox();
    let first = layout.tile_of(bbox.lo());
    let last = layout.tile_of(bbox.hi());
    let tile_range = BoundingBox::new(&first, &last).expect("ordered tile range");
    for coord in tile_range.points() {
        let mut tile = Tile::new(coord.coords().into(), &layout, background);
        let tb = layout.tile_box(coord.coords());
        for (idx, p) in tb.points().enumerate() {
            tile.heights[idx] = config.height(&p);
        }
        for idx in 0..layout.volume() {
            if tile.heights[idx] >= threshold {
                tile.queued[idx] = true;
                tile.work.push_back(idx as u32);
            }
        }
        slots.insert(tile.coord.clone(), tiles.len());
        tiles.push(tile);
    }

    let mut remaining = budget;
    let mut exhausted = false;
    loop {
        let active: Vec<usize> = (0..tiles.len())
            .filter(|&t| !tiles[t].work.is_empty())
            .collect();
        if active.is_empty() {
            break;
        }
        if remaining == 0 {
            exhausted = true;
            break;
        }
        let n = active.len() as u64;
        for (rank, &t) in active.iter().enumerate() {
            tiles[t].share = remaining / n + u64::from((rank as u64) < remaining % n);
        }

        run_superstep(&mut tiles, &layout, execution, audit);

        for tile in &mut tiles {
            remaining -= tile.toppled;
            tile.toppled = 0;
            tile.share = 0;
        }

        // barrier: deliver buffered emissions, creating tiles on first contact
        for t in 0..tiles.len() {
            for face in 0..2 * dim {
                if tiles[t].outbox[face].is_empty() {
                    continue;
                }
                let emissions = std::mem::take(&mut tiles[t].outbox[face]);
                let mut coord = tiles[t].coord.clone();
                coord[face / 2] += if face % 2 == 0 { -1 } else { 1 };
                let slot = *slots.entry(coord.clone()).or_insert_with(|| {
                    tiles.push(Tile::new(coord, &layout, background));
                    tiles.len() - 1
                });
                let target = &mut tiles[slot];
                for &(idx, k) in &emissions {
                    target.add(idx as usize, k, threshold);
                }
                // hand the allocation back for reuse
                let mut emissions = emissions;
                emissions.clear();
                tiles[t].outbox[face] = emissions;
            }
        }
    }

    Ok(assemble(
        tiles,
        &layout,
        config,
        budget - remaining,
        exhausted,
    ))
}

fn run_superstep(tiles: &mut [Tile], layout: &Layout, execution: Execution, audit: bool) {
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => tiles
            .par_iter_mut()
            .filter(|t| t.share > 0)
            .for_each(|t| t.relax(layout, audit)),
        _ => tiles
            .iter_mut()
            .filter(|t| t.share > 0)
            .for_each(|t| t.relax(layout, audit)),
    }
}

fn assemble(
    tiles: Vec<Tile>,
    layout: &Layout,
    config: &SandpileConfig,
    topplings: u64,
    exhausted: bool,
) -> StabilizationResult {
    let bbox = tiles
        .iter()
        .map(|t| layout.tile_box(&t.coord))
        .fold(config.bbox().clone(), |acc, b| acc.union(&b));
    let mut heights = DenseGrid::filled(bbox.clone(), config.background());
    let mut odometer = DenseGrid::filled(bbox.clone(), 0u64);
    for tile in &tiles {
        let tb = layout.tile_box(&tile.coord);
        let row = layout.side;
        let rows = layout.volume() / row;
        for r in 0..rows {
            let start = tb.point_at(r * row);
            let dst = bbox.index_of(&start).expect("tile inside assembled box");
            heights.data_mut()[dst..dst + row]
                .copy_from_slice(&tile.heights[r * row..(r + 1) * row]);
            odometer.data_mut()[dst..dst + row]
                .copy_from_slice(&tile.odometer[r * row..(r + 1) * row]);
        }
    }
    StabilizationResult {
        final_config: SandpileConfig::from_grid(heights),
        odometer: Odometer::from_grid(odometer),
        total_topplings: topplings,
        budget_exhausted: exhausted,
    }
}
