//! Mutable working state of one sequential stabilization run.

use crate::config::SandpileConfig;
use crate::grid::DenseGrid;
use crate::lattice::BoundingBox;
use crate::odometer::Odometer;

const MIN_PAD: usize = 32;

/// Heights are `u64` for ordinary runs and `i64` where intermediate
/// states may go negative.
pub(crate) struct Field<H = u64> {
    pub bbox: BoundingBox,
    pub shape: Vec<usize>,
    pub strides: Vec<usize>,
    pub threshold: u64,
    pub background: H,
    pub heights: Vec<H>,
    pub odometer: Vec<u64>,
    /// Cells on the box boundary; their neighbours may lie outside.
    pub edge: Vec<bool>,
    /// Flat offsets of the 2d neighbours.
    pub offsets: Vec<isize>,
}

impl Field<u64> {
    pub fn new(config: &SandpileConfig) -> Self {
        let heights = config.heights().to_vec();
        let odometer = vec![0; heights.len()];
        Field::from_parts(
            config.bbox().clone(),
            config.threshold(),
            config.background(),
            heights,
            odometer,
        )
    }

    pub fn into_parts(self) -> (SandpileConfig, Odometer) {
        let config = SandpileConfig::from_grid(DenseGrid::from_raw(
            self.bbox.clone(),
            self.heights,
            self.background,
        ));
        let odometer = Odometer::from_grid(DenseGrid::from_raw(self.bbox, self.odometer, 0));
        (config, odometer)
    }
}

impl<H: Copy + PartialEq> Field<H> {
    pub fn from_parts(
        bbox: BoundingBox,
        threshold: u64,
        background: H,
        heights: Vec<H>,
        odometer: Vec<u64>,
    ) -> Self {
        assert_eq!(heights.len(), bbox.len());
        assert_eq!(odometer.len(), bbox.len());
        let mut field = Field {
            shape: Vec::new(),
            strides: Vec::new(),
            threshold,
            background,
            edge: Vec::new(),
            offsets: Vec::new(),
            bbox,
            heights,
            odometer,
        };
        field.relayout();
        field
    }

    fn relayout(&mut self) {
        self.shape = self.bbox.shape();
        self.strides = self.bbox.strides();
        self.offsets = self
            .strides
            .iter()
            .flat_map(|&s| [-(s as isize), s as isize])
            .collect();
        self.edge = (0..self.heights.len())
            .map(|i| self.is_on_edge(i))
            .collect();
    }

    fn is_on_edge(&self, mut idx: usize) -> bool {
        for &extent in &self.shape {
            let c = idx % extent;
            if c == 0 || c == extent - 1 {
                return true;
            }
            idx /= extent;
        }
        false
    }

    /// Pads every side by max(32, 25% of that side); callers move their
    /// worklist through the returned index remap.
    pub fn grow(&mut self) -> impl Fn(usize) -> usize {
        let old_shape = self.shape.clone();
        let pads: Vec<usize> = old_shape.iter().map(|&s| MIN_PAD.max(s / 4)).collect();
        let lo: Vec<i64> = (0..self.bbox.dim())
            .map(|a| self.bbox.lo()[a] - pads[a] as i64)
            .collect();
        let hi: Vec<i64> = (0..self.bbox.dim())
            .map(|a| self.bbox.hi()[a] + pads[a] as i64)
            .collect();
        let grown = BoundingBox::new(&lo, &hi).expect("padding keeps the box valid");

        let mut heights = DenseGrid::from_raw(
            self.bbox.clone(),
            std::mem::take(&mut self.heights),
            self.background,
        );
        heights.resize(grown.clone());
        let mut odometer =
            DenseGrid::from_raw(self.bbox.clone(), std::mem::take(&mut self.odometer), 0);
        odometer.resize(grown.clone());
        self.heights = heights.into_raw().1;
        self.odometer = odometer.into_raw().1;
        self.bbox = grown;
        self.relayout();

        let new_strides = self.strides.clone();
        move |mut old: usize| {
            let mut idx = 0;
            for a in 0..old_shape.len() {
                let c = old % old_shape[a];
                old /= old_shape[a];
                idx += (c + pads[a]) * new_strides[a];
            }
            idx
        }
    }
}
