//! Procedural shapes and scenes used by tests, examples and the CLI.

use std::collections::HashMap;

use crate::error::Result;
use crate::geometry::SurfaceMesh;
use crate::lattice::{build_lattice, TetGrid};
use crate::renderer::{Camera, VertexAttributes};
use crate::Vec3;

/// The boundary of `[0, 1]³` as 12 outward-wound triangles.
pub fn unit_cube_mesh() -> SurfaceMesh {
    box_mesh(Vec3::zeros(), Vec3::repeat(1.0))
}

/// Axis-aligned box with outward-wound triangles.
pub fn box_mesh(min: Vec3, max: Vec3) -> SurfaceMesh {
    let corner = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { min.x } else { max.x },
            if i & 2 == 0 { min.y } else { max.y },
            if i & 4 == 0 { min.z } else { max.z },
        )
    };
    let vertices = (0..8).map(corner).collect();
    let triangles = vec![
        [0, 2, 1], [1, 2, 3], // z = min
        [4, 5, 6], [5, 7, 6], // z = max
        [0, 1, 4], [1, 5, 4], // y = min
        [2, 6, 3], [3, 6, 7], // y = max
        [0, 4, 2], [2, 4, 6], // x = min
        [1, 3, 5], [3, 7, 5], // x = max
    ];
    SurfaceMesh {
        vertices,
        triangles,
    }
}

/// Subdivided icosahedron projected onto a sphere, wound outward.
/// `20 · 4^subdivisions` triangles.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> SurfaceMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for [a, b, c] in triangles {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        triangles = next;
    }
    let mut mesh = SurfaceMesh {
        vertices: vertices.into_iter().map(|v| center + v * radius).collect(),
        triangles,
    };
    if mesh.enclosed_volume() < 0.0 {
        for t in &mut mesh.triangles {
            t.swap(1, 2);
        }
    }
    mesh
}

/// Cameras on a sphere around the unit cube's center, looking at it.
///
/// Directions follow a Fibonacci spiral rotated by `phase` (radians), so
/// different phases give interleaved, non-coincident viewpoints.
pub fn orbit_cameras(count: usize, width: usize, height: usize, distance: f64, phase: f64) -> Vec<Camera> {
    let center = Vec3::repeat(0.5);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    // the cube's bounding sphere fills ~80% of the shorter image side
    let half_extent = 0.5 * 3f64.sqrt();
    let angle = (half_extent / distance).asin() / 0.8;
    let focal = 0.5 * width.min(height) as f64 / angle.tan();
    (0..count)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
            let r = (1.0 - z * z).sqrt();
            let theta = golden * i as f64 + phase;
            let dir = Vec3::new(r * theta.cos(), z, r * theta.sin());
            let up = if dir.y.abs() > 0.95 { Vec3::z() } else { Vec3::y() };
            Camera::look_at(center + dir * distance, center, up, width, height, focal)
        })
        .collect()
}

/// Ground-truth scene for multi-view tests: a solid box `[0.25, 0.75]³`
/// inside a lattice of the given resolution, colored by vertex position.
/// Vertices inside the box are fully visible, all others invisible.
pub fn colored_cube(resolution: usize) -> Result<(TetGrid, VertexAttributes)> {
    let grid = build_lattice(resolution)?;
    let inside = |p: &Vec3| (0..3).all(|ax| p[ax] >= 0.25 - 1e-12 && p[ax] <= 0.75 + 1e-12);
    let attrs = VertexAttributes {
        colors: grid
            .rest_positions
            .iter()
            .map(|p| [0.15 + 0.7 * p.x, 0.15 + 0.7 * p.y, 0.15 + 0.7 * p.z])
            .collect(),
        visibility: grid
            .rest_positions
            .iter()
            .map(|p| if inside(p) { 1.0 } else { 0.0 })
            .collect(),
    };
    Ok((grid, attrs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cube_is_closed_and_outward() {
        let cube = unit_cube_mesh();
        assert_eq!(cube.unmatched_edges(), 0);
        assert!((cube.enclosed_volume() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn icosphere_is_closed_and_outward() {
        let s = icosphere(Vec3::repeat(0.5), 0.3, 3);
        assert_eq!(s.triangles.len(), 1280);
        assert_eq!(s.unmatched_edges(), 0);
        let exact = 4.0 / 3.0 * std::f64::consts::PI * 0.027;
        assert!((s.enclosed_volume() - exact).abs() < 0.02 * exact);
    }
}
