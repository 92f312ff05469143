//! Geometric regularizers on the offset field.

use std::collections::HashMap;
use std::sync::OnceLock;

use nalgebra::Matrix3;
use rayon::prelude::*;

use super::Gradient;
use crate::error::{Error, Result};
use crate::geometry::{signed_volume, signed_volume_grad};
use crate::lattice::{SurfaceFace, TetGrid};
use crate::Vec3;

/// Determinant below which a tet is treated as inverted.
pub const AMIPS_DET_EPS: f64 = 1e-12;
/// Energy of an inverted tet at the barrier threshold.
pub const AMIPS_BARRIER: f64 = 1e6;
/// Growth of the barrier as the determinant keeps dropping.
pub const AMIPS_BARRIER_SLOPE: f64 = 1e6;

/// Uniform graph Laplacian of the offsets: `Σ_i ‖Δv_i − mean_{j∈N(i)} Δv_j‖²`.
pub fn laplacian_loss(grid: &TetGrid) -> Gradient {
    let offsets = &grid.offsets;
    let residual: Vec<Vec3> = grid
        .vertex_neighbors
        .iter()
        .enumerate()
        .map(|(i, nbrs)| {
            if nbrs.is_empty() {
                return Vec3::zeros();
            }
            let mean = nbrs.iter().fold(Vec3::zeros(), |acc, &j| acc + offsets[j]) / nbrs.len() as f64;
            offsets[i] - mean
        })
        .collect();
    let value = residual.iter().map(|r| r.norm_squared()).sum();
    let grad = grid
        .vertex_neighbors
        .iter()
        .enumerate()
        .map(|(m, nbrs)| {
            // the neighbor relation is symmetric
            let pulled = nbrs.iter().fold(Vec3::zeros(), |acc, &i| {
                acc + residual[i] / grid.vertex_neighbors[i].len() as f64
            });
            (residual[m] - pulled) * 2.0
        })
        .collect();
    Gradient { value, grad }
}

/// `Σ_i ‖Δv_i‖²`.
pub fn delta_loss(grid: &TetGrid) -> Gradient {
    Gradient {
        value: grid.offsets.iter().map(|o| o.norm_squared()).sum(),
        grad: grid.offsets.iter().map(|o| o * 2.0).collect(),
    }
}

/// Scatters per-tet vertex gradients in tet order.
fn accumulate(grid: &TetGrid, per_tet: Vec<(f64, [Vec3; 4])>) -> Gradient {
    let mut grad = vec![Vec3::zeros(); grid.vertex_count()];
    let mut value = 0.0;
    for (tet, (e, g)) in grid.tets.iter().zip(per_tet) {
        value += e;
        for (slot, &v) in tet.iter().enumerate() {
            grad[v] += g[slot];
        }
    }
    Gradient { value, grad }
}

/// `Σ_k (V_k / V̄ − 1)²` with `V̄ = 1/K`, the mean rest volume.
pub fn equivolume_loss(grid: &TetGrid) -> Gradient {
    let pos = grid.deformed_positions();
    let mean_rest = 1.0 / grid.tet_count() as f64;
    let per_tet = grid
        .tets
        .par_iter()
        .map(|t| {
            let [a, b, c, d] = t.map(|v| pos[v]);
            let r = signed_volume(a, b, c, d) / mean_rest - 1.0;
            let scale = 2.0 * r / mean_rest;
            (r * r, signed_volume_grad(a, b, c, d).map(|g| g * scale))
        })
        .collect();
    accumulate(grid, per_tet)
}

fn reference_inverse() -> &'static Matrix3<f64> {
    static INV: OnceLock<Matrix3<f64>> = OnceLock::new();
    INV.get_or_init(|| {
        // unit-edge regular tetrahedron, positively oriented
        let r = Matrix3::new(
            1.0, 0.5, 0.5,
            0.0, 3f64.sqrt() / 2.0, 3f64.sqrt() / 6.0,
            0.0, 0.0, (2.0f64 / 3.0).sqrt(),
        );
        r.try_inverse().expect("reference tetrahedron is invertible")
    })
}

fn cofactor(j: &Matrix3<f64>) -> Matrix3<f64> {
    let (c0, c1, c2) = (j.column(0).into_owned(), j.column(1).into_owned(), j.column(2).into_owned());
    Matrix3::from_columns(&[c1.cross(&c2), c2.cross(&c0), c0.cross(&c1)])
}

/// AMIPS energy `tr(JᵀJ) / det(J)^{2/3}` of one tet, `J` mapping the
/// unit regular tetrahedron onto it, with its gradient per vertex.
///
/// Equals 3 exactly for any regular tetrahedron. Inverted or collapsed tets
/// (`det J ≤ ε`) get a finite linear barrier whose gradient restores volume.
pub fn amips_energy(tet: &[Vec3; 4]) -> (f64, [Vec3; 4]) {
    let edges = Matrix3::from_columns(&[tet[1] - tet[0], tet[2] - tet[0], tet[3] - tet[0]]);
    let rinv = reference_inverse();
    let j = edges * rinv;
    let det = j.determinant();
    let (energy, d_j) = if det > AMIPS_DET_EPS {
        let frob = j.norm_squared();
        let s = det.powf(-2.0 / 3.0);
        let d_j = (j * 2.0 - cofactor(&j) * (2.0 / 3.0 * frob / det)) * s;
        (frob * s, d_j)
    } else {
        let energy = AMIPS_BARRIER + AMIPS_BARRIER_SLOPE * (AMIPS_DET_EPS - det);
        (energy, cofactor(&j) * -AMIPS_BARRIER_SLOPE)
    };
    let d_edges = d_j * rinv.transpose();
    let g1 = d_edges.column(0).into_owned();
    let g2 = d_edges.column(1).into_owned();
    let g3 = d_edges.column(2).into_owned();
    (energy, [-(g1 + g2 + g3), g1, g2, g3])
}

/// Sum of per-tet AMIPS energies.
pub fn amips_loss(grid: &TetGrid) -> Gradient {
    let pos = grid.deformed_positions();
    let per_tet = grid
        .tets
        .par_iter()
        .map(|t| amips_energy(&t.map(|v| pos[v])))
        .collect();
    accumulate(grid, per_tet)
}

/// `Σ (1 − n_i · n_j)` over pairs of surface faces sharing an edge.
pub fn smoothness_loss(grid: &TetGrid, faces: &[SurfaceFace]) -> Result<Gradient> {
    let pos = grid.deformed_positions();
    let mut normals = Vec::with_capacity(faces.len());
    for f in faces {
        let [a, b, c] = f.vertices.map(|v| pos[v]);
        let (e1, e2) = (b - a, c - a);
        let cross = e1.cross(&e2);
        let len = cross.norm();
        let scale = e1.norm_squared().max(e2.norm_squared());
        if !(len > 1e-14 * scale) {
            return Err(Error::DegenerateGeometry(format!("surface face {} has zero area", f.face)));
        }
        normals.push((cross / len, len, e1, e2));
    }

    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, f) in faces.iter().enumerate() {
        for e in 0..3 {
            let (u, v) = (f.vertices[e], f.vertices[(e + 1) % 3]);
            by_edge.entry((u.min(v), u.max(v))).or_default().push(i);
        }
    }
    let mut pairs = Vec::new();
    for group in by_edge.values() {
        for x in 0..group.len() {
            for y in (x + 1)..group.len() {
                pairs.push((group[x], group[y]));
            }
        }
    }
    pairs.sort_unstable();

    let mut value = 0.0;
    let mut normal_grad = vec![Vec3::zeros(); faces.len()];
    for &(i, j) in &pairs {
        value += 1.0 - normals[i].0.dot(&normals[j].0);
        normal_grad[i] -= normals[j].0;
        normal_grad[j] -= normals[i].0;
    }
    let mut grad = vec![Vec3::zeros(); grid.vertex_count()];
    for ((f, g_n), &(n, len, e1, e2)) in faces.iter().zip(&normal_grad).zip(&normals) {
        // d(c/|c|) = (I − n nᵀ) dc / |c|
        let g_c = (g_n - n * n.dot(g_n)) / len;
        let gb = e2.cross(&g_c);
        let gc = g_c.cross(&e1);
        grad[f.vertices[0]] -= gb + gc;
        grad[f.vertices[1]] += gb;
        grad[f.vertices[2]] += gc;
    }
    Ok(Gradient { value, grad })
}
