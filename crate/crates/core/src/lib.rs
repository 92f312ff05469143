//! Deformable tetrahedral meshes.
//!
//! A regular lattice of tetrahedra over the unit cube whose vertices carry
//! learnable offsets and whose cells carry occupancy. The crate provides the
//! pieces to turn that into either a tetrahedralization of a watertight
//! surface (winding-number labels plus surface fitting) or a colored
//! reconstruction from posed images (a differentiable ray-cast renderer).
//!
//! Every loss term returns its analytic gradient; nothing here depends on an
//! autodiff framework.

pub mod energies;
pub mod error;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod lattice;
pub mod metrics;
pub mod occupancy;
pub mod optimize;
pub mod renderer;

pub use error::{Error, Result};
pub use nalgebra;
pub use geometry::{SampleSet, SurfaceMesh};
pub use lattice::{build_lattice, SurfaceFace, TetGrid};
pub use occupancy::{OccupancyField, OccupancyMode};

/// Vector type used throughout.
pub type Vec3 = nalgebra::Vector3<f64>;
