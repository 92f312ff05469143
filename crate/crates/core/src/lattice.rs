//! Regular tetrahedral lattice over the unit cube.
//!
//! Each cube cell of an `n × n × n` grid is split into the six tetrahedra of
//! the Freudenthal (Kuhn) subdivision, one per ordering of the three axes.
//! The subdivision is conforming, so every interior triangle is shared by
//! exactly two tetrahedra.

use std::collections::{BTreeSet, HashMap};

use crate::error::{invalid, Result};
use crate::geometry::{signed_volume, SurfaceMesh};
use crate::occupancy::OccupancyField;
use crate::Vec3;

const AXIS_ORDERS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Faces of a positively oriented tet `(a, b, c, d)`, each wound so its
/// normal points out of the tet. Face `i` is opposite local vertex `i`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

/// Deformable tetrahedral grid.
///
/// Topology is fixed at construction; only `offsets` change afterwards.
#[derive(Clone, Debug, PartialEq)]
pub struct TetGrid {
    pub resolution: usize,
    pub rest_positions: Vec<Vec3>,
    pub offsets: Vec<Vec3>,
    /// Vertex indices per tet, positively oriented at rest.
    pub tets: Vec<[usize; 4]>,
    /// Unique triangles, wound outward from their first owner.
    pub faces: Vec<[usize; 3]>,
    /// `(first owner, second owner)`; `None` marks the domain boundary.
    pub face_adjacency: Vec<(usize, Option<usize>)>,
    /// Face index of each tet's faces in [`TET_FACES`] order.
    pub tet_faces: Vec<[usize; 4]>,
    /// Sorted edge-adjacent vertices.
    pub vertex_neighbors: Vec<Vec<usize>>,
    /// Vertices lying on the faces of the unit cube.
    pub boundary_vertices: Vec<bool>,
}

/// A face selected for the surface, wound from occupied toward empty space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SurfaceFace {
    pub face: usize,
    pub vertices: [usize; 3],
}

/// Builds the Freudenthal subdivision of an `n³` grid over `[0, 1]³`.
pub fn build_lattice(resolution: usize) -> Result<TetGrid> {
    if resolution == 0 {
        return Err(invalid("lattice resolution must be >= 1"));
    }
    let n = resolution;
    let side = n + 1;
    let index = |i: usize, j: usize, k: usize| i + side * (j + side * k);

    let mut rest_positions = Vec::with_capacity(side * side * side);
    let mut boundary_vertices = Vec::with_capacity(side * side * side);
    for k in 0..side {
        for j in 0..side {
            for i in 0..side {
                rest_positions.push(Vec3::new(
                    i as f64 / n as f64,
                    j as f64 / n as f64,
                    k as f64 / n as f64,
                ));
                boundary_vertices.push([i, j, k].iter().any(|&c| c == 0 || c == n));
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * n * n * n);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                for order in AXIS_ORDERS {
                    let mut corner = [i, j, k];
                    let mut tet = [index(i, j, k); 4];
                    for (step, &axis) in order.iter().enumerate() {
                        corner[axis] += 1;
                        tet[step + 1] = index(corner[0], corner[1], corner[2]);
                    }
                    let p = tet.map(|v| rest_positions[v]);
                    if signed_volume(p[0], p[1], p[2], p[3]) < 0.0 {
                        tet.swap(2, 3);
                    }
                    tets.push(tet);
                }
            }
        }
    }

    let mut lookup: HashMap<[usize; 3], usize> = HashMap::with_capacity(tets.len() * 3);
    let mut faces = Vec::new();
    let mut face_adjacency: Vec<(usize, Option<usize>)> = Vec::new();
    let mut tet_faces = Vec::with_capacity(tets.len());
    for (t, tet) in tets.iter().enumerate() {
        let mut local = [0usize; 4];
        for (slot, f) in TET_FACES.iter().enumerate() {
            let tri = f.map(|l| tet[l]);
            let mut key = tri;
            key.sort_unstable();
            let id = *lookup.entry(key).or_insert_with(|| {
                faces.push(tri);
                face_adjacency.push((t, None));
                faces.len() - 1
            });
            if face_adjacency[id].0 != t {
                debug_assert!(face_adjacency[id].1.is_none(), "face shared by three tets");
                face_adjacency[id].1 = Some(t);
            }
            local[slot] = id;
        }
        tet_faces.push(local);
    }

    let mut nbrs = vec![BTreeSet::new(); rest_positions.len()];
    for tet in &tets {
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    nbrs[tet[a]].insert(tet[b]);
                }
            }
        }
    }

    let offsets = vec![Vec3::zeros(); rest_positions.len()];
    Ok(TetGrid {
        resolution,
        rest_positions,
        offsets,
        tets,
        faces,
        face_adjacency,
        tet_faces,
        vertex_neighbors: nbrs.into_iter().map(|s| s.into_iter().collect()).collect(),
        boundary_vertices,
    })
}

impl TetGrid {
    pub fn vertex_count(&self) -> usize {
        self.rest_positions.len()
    }

    pub fn tet_count(&self) -> usize {
        self.tets.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn cell_size(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// Rest positions plus offsets.
    pub fn deformed_positions(&self) -> Vec<Vec3> {
        self.rest_positions
            .iter()
            .zip(&self.offsets)
            .map(|(r, o)| r + o)
            .collect()
    }

    pub fn set_offsets(&mut self, offsets: Vec<Vec3>) -> Result<()> {
        if offsets.len() != self.vertex_count() {
            return Err(invalid(format!(
                "expected {} offsets, got {}",
                self.vertex_count(),
                offsets.len()
            )));
        }
        self.offsets = offsets;
        Ok(())
    }

    #[inline]
    pub fn tet_points(&self, positions: &[Vec3], tet: usize) -> [Vec3; 4] {
        self.tets[tet].map(|v| positions[v])
    }

    /// Signed volume of every tet at the given positions.
    pub fn tet_volumes(&self, positions: &[Vec3]) -> Vec<f64> {
        self.tets
            .iter()
            .map(|t| signed_volume(positions[t[0]], positions[t[1]], positions[t[2]], positions[t[3]]))
            .collect()
    }

    pub fn is_boundary_face(&self, face: usize) -> bool {
        self.face_adjacency[face].1.is_none()
    }

    /// Whether two grids share vertices, tets, faces and adjacency.
    pub fn same_topology(&self, other: &TetGrid) -> bool {
        self.resolution == other.resolution
            && self.tets == other.tets
            && self.faces == other.faces
            && self.face_adjacency == other.face_adjacency
            && self.vertex_neighbors == other.vertex_neighbors
    }
}

/// Faces separating occupied tets (`occ > threshold`) from empty ones or the
/// exterior, wound so the normal leaves the occupied side.
pub fn surface_candidate_faces(
    grid: &TetGrid,
    occ: &OccupancyField,
    threshold: f64,
) -> Result<Vec<SurfaceFace>> {
    if occ.len() != grid.tet_count() {
        return Err(invalid(format!(
            "occupancy has {} values for {} tets",
            occ.len(),
            grid.tet_count()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(invalid(format!("threshold {threshold} outside (0, 1)")));
    }
    let occupied = |t: usize| occ.values[t] > threshold;
    let mut out = Vec::new();
    for (f, &(first, second)) in grid.face_adjacency.iter().enumerate() {
        let a = occupied(first);
        let b = second.map_or(false, occupied);
        if a == b {
            continue;
        }
        let mut vertices = grid.faces[f];
        if !a {
            vertices.swap(1, 2);
        }
        out.push(SurfaceFace { face: f, vertices });
    }
    Ok(out)
}

/// Triangle soup for the given faces at the given positions.
pub fn face_triangles(positions: &[Vec3], faces: &[SurfaceFace]) -> Vec<[Vec3; 3]> {
    faces
        .iter()
        .map(|f| f.vertices.map(|v| positions[v]))
        .collect()
}

/// Compact surface mesh of the given faces; vertices are renumbered in order
/// of first use.
pub fn surface_mesh(positions: &[Vec3], faces: &[SurfaceFace]) -> SurfaceMesh {
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let triangles = faces
        .iter()
        .map(|f| {
            f.vertices.map(|v| {
                *remap.entry(v).or_insert_with(|| {
                    vertices.push(positions[v]);
                    vertices.len() - 1
                })
            })
        })
        .collect();
    SurfaceMesh {
        vertices,
        triangles,
    }
}

/// Surface of the occupied region of a deformed grid.
///
/// Where occupied tets meet only along an edge or at a vertex, the lattice
/// vertex is duplicated once per sheet of surface passing through it, so the
/// result is a 2-manifold: every edge belongs to exactly two triangles.
pub fn extract_surface(grid: &TetGrid, occ: &OccupancyField, threshold: f64) -> Result<SurfaceMesh> {
    let faces = surface_candidate_faces(grid, occ, threshold)?;
    let occupied = |t: usize| occ.values[t] > threshold;
    let mut slot = vec![usize::MAX; grid.face_count()];
    for (i, f) in faces.iter().enumerate() {
        slot[f.face] = i;
    }
    let inner_tet = |f: &SurfaceFace| {
        let (first, second) = grid.face_adjacency[f.face];
        if occupied(first) {
            first
        } else {
            second.expect("a surface face has an occupied side")
        }
    };

    // Rotating about edge (a, b) from surface face `i` through occupied tets
    // ends at the face closing the same occupied sector.
    let partner = |i: usize, a: usize, b: usize| -> usize {
        let mut tet = inner_tet(&faces[i]);
        let mut face = faces[i].face;
        loop {
            let next = grid.tet_faces[tet]
                .into_iter()
                .find(|&g| g != face && grid.faces[g].contains(&a) && grid.faces[g].contains(&b))
                .expect("two faces of a tet share each of its edges");
            let (first, second) = grid.face_adjacency[next];
            let other = if first == tet { second } else { Some(first) };
            match other {
                Some(o) if occupied(o) => {
                    tet = o;
                    face = next;
                }
                _ => return slot[next],
            }
        }
    };

    // union-find over face corners; each class becomes one output vertex
    let mut parent: Vec<usize> = (0..3 * faces.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let corner = |i: usize, v: usize| 3 * i + faces[i].vertices.iter().position(|&w| w == v).unwrap();
    let mut partners = vec![[0usize; 3]; faces.len()];
    for (i, f) in faces.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (f.vertices[e], f.vertices[(e + 1) % 3]);
            let j = partner(i, a, b);
            partners[i][e] = j;
            for v in [a, b] {
                let (x, y) = (root(&mut parent, corner(i, v)), root(&mut parent, corner(j, v)));
                parent[x.max(y)] = x.min(y);
            }
        }
    }

    let positions = grid.deformed_positions();
    let mut remap: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let corners: Vec<[usize; 3]> = faces
        .iter()
        .enumerate()
        .map(|(i, f)| {
            std::array::from_fn(|k| {
                let r = root(&mut parent, 3 * i + k);
                *remap.entry(r).or_insert_with(|| {
                    vertices.push(positions[f.vertices[k]]);
                    vertices.len() - 1
                })
            })
        })
        .collect();

    // An edge can still carry several sheets when both of its endpoints are
    // shared between them. Each sheet then gets its own midpoint on that
    // edge, and the faces involved are re-triangulated as fans.
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
    for c in &corners {
        for e in 0..3 {
            let (a, b) = (c[e], c[(e + 1) % 3]);
            *edge_use.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut triangles = Vec::with_capacity(corners.len());
    for (i, c) in corners.iter().enumerate() {
        let mut ring = Vec::with_capacity(6);
        for e in 0..3 {
            let (a, b) = (c[e], c[(e + 1) % 3]);
            ring.push(a);
            if edge_use[&(a.min(b), a.max(b))] > 2 {
                let j = partners[i][e];
                let m = *midpoints.entry((i.min(j), i.max(j))).or_insert_with(|| {
                    vertices.push((vertices[a] + vertices[b]) / 2.0);
                    vertices.len() - 1
                });
                ring.push(m);
            }
        }
        if ring.len() == 3 {
            triangles.push([c[0], c[1], c[2]]);
            continue;
        }
        let center = vertices.len();
        vertices.push((vertices[c[0]] + vertices[c[1]] + vertices[c[2]]) / 3.0);
        for k in 0..ring.len() {
            triangles.push([center, ring[k], ring[(k + 1) % ring.len()]]);
        }
    }
    Ok(SurfaceMesh {
        vertices,
        triangles,
    })
}
