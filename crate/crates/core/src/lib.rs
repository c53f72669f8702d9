//! Abelian sandpile stabilization on Z^d.
//!
//! Configurations are finite deviations from a uniform background. The
//! engine topples active cells (at least 2d particles) in any of several
//! orders, all of which reach the same final configuration and odometer.
//! On top of it sit cluster geometry and the verification experiments.

pub mod config;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod lattice;
pub mod odometer;

pub use config::{
    add_everywhere, config_leq, make_point_source, make_square_config, SandpileConfig,
};
pub use engine::{stabilize, topple, StabilizationResult, Strategy};
pub use error::{Result, SandpileError};
pub use geometry::Cluster;
pub use lattice::{neighbors, BoundingBox, LatticePoint};
pub use odometer::Odometer;
