//! Per-tet occupancy: ground-truth labels from a watertight surface, the
//! face probability that turns occupancy into a surface, and soft
//! occupancies derived from vertex visibility.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{centroid, signed_volume, winding_number, SurfaceMesh};
use crate::lattice::TetGrid;

/// Centroids whose winding number reaches this value are inside.
pub const WINDING_INSIDE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OccupancyMode {
    Soft,
    Hard,
}

/// One occupancy value per tet.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyField {
    pub values: Vec<f64>,
    pub mode: OccupancyMode,
}

impl OccupancyField {
    pub fn hard(labels: Vec<bool>) -> Self {
        Self {
            values: labels.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect(),
            mode: OccupancyMode::Hard,
        }
    }

    pub fn soft(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid(format!("soft occupancy {v} outside [0, 1]")));
        }
        Ok(Self {
            values,
            mode: OccupancyMode::Soft,
        })
    }

    pub fn from_logits(logits: &[f64]) -> Self {
        Self {
            values: logits.iter().map(|&l| logistic(l)).collect(),
            mode: OccupancyMode::Soft,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_occupied(&self, tet: usize, threshold: f64) -> bool {
        self.values[tet] > threshold
    }

    /// Hard labels at `threshold`.
    pub fn thresholded(&self, threshold: f64) -> Self {
        Self::hard(self.values.iter().map(|&v| v > threshold).collect())
    }

    pub fn occupied_count(&self, threshold: f64) -> usize {
        self.values.iter().filter(|&&v| v > threshold).count()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Winding number of `target` at every deformed tet centroid.
pub fn centroid_winding_numbers(grid: &TetGrid, target: &SurfaceMesh) -> Vec<f64> {
    let positions = grid.deformed_positions();
    (0..grid.tet_count())
        .into_par_iter()
        .map(|t| winding_number(&centroid(&grid.tet_points(&positions, t)), target))
        .collect()
}

/// Hard labels: a tet is occupied when the winding number of `target` at its
/// deformed centroid is at least one half.
///
/// Logs a warning when more than 1% of the winding values are ambiguous
/// (between 0.25 and 0.75), which usually means the target is not closed.
pub fn label_occupancy(grid: &TetGrid, target: &SurfaceMesh) -> Result<OccupancyField> {
    if target.is_empty() {
        return Err(invalid("target surface has no triangles"));
    }
    let winding = centroid_winding_numbers(grid, target);
    let ambiguous = winding.iter().filter(|&&w| w > 0.25 && w < 0.75).count();
    if ambiguous * 100 > winding.len() {
        log::warn!(
            "{ambiguous} of {} centroid winding numbers lie in (0.25, 0.75); target may not be watertight",
            winding.len()
        );
    }
    Ok(OccupancyField::hard(
        winding.into_iter().map(|w| w >= WINDING_INSIDE).collect(),
    ))
}

/// Probability that `face` separates an occupied tet from an empty one.
///
/// Boundary faces see a permanently empty exterior, so they return the
/// occupancy of their single owner.
pub fn face_probability(grid: &TetGrid, occ: &OccupancyField, face: usize) -> f64 {
    let (first, second) = grid.face_adjacency[face];
    let o1 = occ.values[first];
    let o2 = second.map_or(0.0, |t| occ.values[t]);
    pair_probability(o1, o2)
}

#[inline]
pub fn pair_probability(o1: f64, o2: f64) -> f64 {
    o1 * (1.0 - o2) + (1.0 - o1) * o2
}

/// Tet occupancy as the maximum visibility over its four vertices.
pub fn occupancy_from_vertex_visibility(grid: &TetGrid, visibility: &[f64]) -> Result<OccupancyField> {
    if visibility.len() != grid.vertex_count() {
        return Err(invalid(format!(
            "{} visibility values for {} vertices",
            visibility.len(),
            grid.vertex_count()
        )));
    }
    OccupancyField::soft(
        grid.tets
            .iter()
            .map(|t| t.iter().map(|&v| visibility[v]).fold(f64::NEG_INFINITY, f64::max))
            .collect(),
    )
}

/// Number of tets whose deformed signed volume is not positive.
pub fn count_flipped(grid: &TetGrid) -> usize {
    let p = grid.deformed_positions();
    grid.tets
        .iter()
        .filter(|t| signed_volume(p[t[0]], p[t[1]], p[t[2]], p[t[3]]) <= 0.0)
        .count()
}
