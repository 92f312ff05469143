//! Geometric kernels shared by the lattice, the energies and the renderer.
//!
//! Everything here is a pure function of its inputs.

mod bvh;
mod sampling;

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec3;

pub use bvh::{Aabb, Bvh};
pub use sampling::{sample_surface, sample_triangles, SampleSet};

/// Smallest accepted ray parameter for a hit.
pub const RAY_T_MIN: f64 = 1e-6;

/// Indexed triangle mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl SurfaceMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some((i, t)) = triangles
            .iter()
            .enumerate()
            .find(|(_, t)| t.iter().any(|&v| v >= n))
        {
            return Err(Error::InvalidArgument(format!(
                "triangle {i} references vertex {:?} but mesh has {n} vertices",
                t
            )));
        }
        Ok(Self {
            vertices,
            triangles,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    #[inline]
    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_soup(&self) -> Vec<[Vec3; 3]> {
        (0..self.triangles.len()).map(|i| self.triangle(i)).collect()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|i| triangle_area(&self.triangle(i)))
            .sum()
    }

    /// Signed enclosed volume (positive for outward orientation).
    pub fn enclosed_volume(&self) -> f64 {
        let o = Vec3::zeros();
        (0..self.triangles.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                signed_volume(o, a, b, c)
            })
            .sum()
    }

    /// Number of directed edges without a matching opposite edge.
    ///
    /// Zero for a closed, consistently oriented surface.
    pub fn unmatched_edges(&self) -> usize {
        let mut balance: HashMap<(usize, usize), i64> = HashMap::new();
        for t in &self.triangles {
            for e in 0..3 {
                let (u, v) = (t[e], t[(e + 1) % 3]);
                if u < v {
                    *balance.entry((u, v)).or_default() += 1;
                } else {
                    *balance.entry((v, u)).or_default() -= 1;
                }
            }
        }
        balance.values().map(|b| b.unsigned_abs() as usize).sum()
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
        }
    }
}

pub fn triangle_area(tri: &[Vec3; 3]) -> f64 {
    0.5 * (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).norm()
}

/// `det[b - a, c - a, d - a] / 6`.
#[inline]
pub fn signed_volume(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

/// Gradient of [`signed_volume`] with respect to each of its four arguments.
#[inline]
pub fn signed_volume_grad(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> [Vec3; 4] {
    let (e1, e2, e3) = (b - a, c - a, d - a);
    let gb = e2.cross(&e3) / 6.0;
    let gc = e3.cross(&e1) / 6.0;
    let gd = e1.cross(&e2) / 6.0;
    [-(gb + gc + gd), gb, gc, gd]
}

#[inline]
pub fn centroid(tet: &[Vec3; 4]) -> Vec3 {
    (tet[0] + tet[1] + tet[2] + tet[3]) * 0.25
}

/// Signed solid angle subtended by a triangle at `p`.
///
/// Positive when the triangle winds counter-clockwise as seen from `p`
/// (i.e. `p` is behind its right-hand normal). Uses the two-argument
/// arctangent form of Van Oosterom and Strackee.
pub fn solid_angle(p: &Vec3, tri: &[Vec3; 3]) -> f64 {
    let a = tri[0] - p;
    let b = tri[1] - p;
    let c = tri[2] - p;
    let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
    let num = a.dot(&b.cross(&c));
    let den = la * lb * lc + a.dot(&b) * lc + a.dot(&c) * lb + b.dot(&c) * la;
    2.0 * num.atan2(den)
}

/// Generalized winding number of `surface` around `p`.
///
/// Close to one strictly inside a closed outward-oriented surface, close to
/// zero strictly outside. On the surface itself the value is half-integral.
pub fn winding_number(p: &Vec3, surface: &SurfaceMesh) -> f64 {
    let total: f64 = (0..surface.triangles.len())
        .map(|i| solid_angle(p, &surface.triangle(i)))
        .sum();
    total / (4.0 * PI)
}

/// Which feature of a triangle the closest point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TriangleRegion {
    Face,
    EdgeAB,
    EdgeBC,
    EdgeCA,
    VertexA,
    VertexB,
    VertexC,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoint {
    pub sq_distance: f64,
    pub point: Vec3,
    /// Barycentric coordinates of `point` with respect to the triangle.
    pub barycentric: [f64; 3],
    pub region: TriangleRegion,
}

fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, Vec3) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (s, a + ab * s)
}

fn with_bary(p: &Vec3, bary: [f64; 3], tri: &[Vec3; 3], region: TriangleRegion) -> ClosestPoint {
    let point = tri[0] * bary[0] + tri[1] * bary[1] + tri[2] * bary[2];
    ClosestPoint {
        sq_distance: (p - point).norm_squared(),
        point,
        barycentric: bary,
        region,
    }
}

/// Exact closest point on a (possibly degenerate) triangle.
pub fn point_triangle_distance(p: &Vec3, tri: &[Vec3; 3]) -> ClosestPoint {
    use TriangleRegion::*;
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return with_bary(p, [1.0, 0.0, 0.0], tri, VertexA);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return with_bary(p, [0.0, 1.0, 0.0], tri, VertexB);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 && d1 - d3 > 0.0 {
        let v = d1 / (d1 - d3);
        return with_bary(p, [1.0 - v, v, 0.0], tri, EdgeAB);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return with_bary(p, [0.0, 0.0, 1.0], tri, VertexC);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 && d2 - d6 > 0.0 {
        let w = d2 / (d2 - d6);
        return with_bary(p, [1.0 - w, 0.0, w], tri, EdgeCA);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 && (d4 - d3) + (d5 - d6) > 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return with_bary(p, [0.0, 1.0 - w, w], tri, EdgeBC);
    }
    let denom = va + vb + vc;
    // va + vb + vc = |ab x ac|^2; tiny means a sliver, where the edges are exact
    if denom > 1e-30 * ab.norm_squared().max(ac.norm_squared()).powi(2) && denom > 0.0 {
        let v = vb / denom;
        let w = vc / denom;
        return with_bary(p, [1.0 - v - w, v, w], tri, Face);
    }
    let (s_ab, _) = closest_on_segment(p, a, b);
    let (s_bc, _) = closest_on_segment(p, b, c);
    let (s_ca, _) = closest_on_segment(p, c, a);
    let candidates = [
        with_bary(p, [1.0 - s_ab, s_ab, 0.0], tri, EdgeAB),
        with_bary(p, [0.0, 1.0 - s_bc, s_bc], tri, EdgeBC),
        with_bary(p, [s_ca, 0.0, 1.0 - s_ca], tri, EdgeCA),
    ];
    candidates
        .into_iter()
        .min_by(|x, y| x.sq_distance.total_cmp(&y.sq_distance))
        .expect("three candidates")
}

/// Gradient of the squared point-triangle distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceGrad {
    pub point: Vec3,
    pub triangle: [Vec3; 3],
}

/// Gradient of the squared distance with the closest feature held fixed.
///
/// The closest point `q = Σ β_i x_i` minimizes the distance over the active
/// feature, so by the envelope theorem `∂/∂p = 2(p - q)` and
/// `∂/∂x_i = -2 β_i (p - q)` in every region.
pub fn point_triangle_distance_grad(p: &Vec3, tri: &[Vec3; 3]) -> DistanceGrad {
    let cp = point_triangle_distance(p, tri);
    closest_point_grad(p, &cp)
}

pub(crate) fn closest_point_grad(p: &Vec3, cp: &ClosestPoint) -> DistanceGrad {
    let r = (p - cp.point) * 2.0;
    DistanceGrad {
        point: r,
        triangle: [
            -r * cp.barycentric[0],
            -r * cp.barycentric[1],
            -r * cp.barycentric[2],
        ],
    }
}

/// Local vertex pairs for the six edges of a tetrahedron.
pub const TET_EDGES: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Interior dihedral angle (degrees) along each edge in [`TET_EDGES`] order.
pub fn dihedral_angles(tet: &[Vec3; 4]) -> Result<[f64; 6]> {
    let scale = TET_EDGES
        .iter()
        .map(|&(i, j)| (tet[j] - tet[i]).norm())
        .fold(0.0, f64::max);
    let vol = signed_volume(tet[0], tet[1], tet[2], tet[3]);
    if scale == 0.0 || vol.abs() <= 1e-12 * scale.powi(3) {
        return Err(Error::DegenerateGeometry(format!(
            "tetrahedron with volume {vol:e} has no dihedral angles"
        )));
    }
    let mut out = [0.0; 6];
    for (slot, &(i, j)) in TET_EDGES.iter().enumerate() {
        let (k, l) = other_two(i, j);
        let e = (tet[j] - tet[i]).normalize();
        let u = tet[k] - tet[i];
        let w = tet[l] - tet[i];
        let u = u - e * e.dot(&u);
        let w = w - e * e.dot(&w);
        out[slot] = u.cross(&w).norm().atan2(u.dot(&w)).to_degrees();
    }
    Ok(out)
}

fn other_two(i: usize, j: usize) -> (usize, usize) {
    let mut rest = (0..4).filter(|&v| v != i && v != j);
    (rest.next().unwrap(), rest.next().unwrap())
}

/// Affine barycentric coordinates of `pixel` in a projected triangle.
pub fn barycentric_2d(a: [f64; 2], b: [f64; 2], c: [f64; 2], pixel: [f64; 2]) -> Result<[f64; 3]> {
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let scale = ((b[0] - a[0]).abs() + (b[1] - a[1]).abs())
        .max((c[0] - a[0]).abs() + (c[1] - a[1]).abs());
    if det.abs() <= 1e-14 * scale * scale || det == 0.0 {
        return Err(Error::DegenerateGeometry(
            "projected triangle has zero area".into(),
        ));
    }
    let wb = ((pixel[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (pixel[1] - a[1])) / det;
    let wc = ((b[0] - a[0]) * (pixel[1] - a[1]) - (pixel[0] - a[0]) * (b[1] - a[1])) / det;
    Ok([1.0 - wb - wc, wb, wc])
}

/// A ray-triangle hit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub t: f64,
    /// Weights of the three triangle vertices at the hit point.
    pub barycentric: [f64; 3],
}

/// Two-sided Möller–Trumbore intersection; hits with `t <= RAY_T_MIN` are
/// ignored.
#[inline]
pub fn ray_triangle_intersect(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<RayHit> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-12 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if t <= RAY_T_MIN {
        return None;
    }
    Some(RayHit {
        t,
        barycentric: [1.0 - u - v, u, v],
    })
}

/// [`ray_barycentric`] plus the gradients of the weights with respect to
/// the triangle's vertices.
///
/// Returns `(w, dw)` where `dw[i][v]` is `∂w_i / ∂x_v`.
/// Barycentric weights of the point where a fixed ray crosses the plane of
/// `tri`. Unlike [`ray_triangle_intersect`] this never rejects: weights may
/// leave `[0, 1]` when the crossing falls outside the triangle.
#[inline]
pub fn ray_barycentric(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> [f64; 3] {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let s = origin - tri[0];
    let delta = e1.dot(&dir.cross(&e2));
    let u = s.dot(&dir.cross(&e2)) / delta;
    let v = dir.dot(&s.cross(&e1)) / delta;
    [1.0 - u - v, u, v]
}

pub fn ray_barycentric_with_grad(
    origin: &Vec3,
    dir: &Vec3,
    tri: &[Vec3; 3],
) -> ([f64; 3], [[Vec3; 3]; 3]) {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let s = origin - tri[0];
    // u = [s, d, e2] / Δ, v = [d, s, e1] / Δ, Δ = [e1, d, e2]
    let delta = e1.dot(&dir.cross(&e2));
    let pu = s.dot(&dir.cross(&e2));
    let pv = dir.dot(&s.cross(&e1));
    let u = pu / delta;
    let v = pv / delta;

    let d_delta_e1 = dir.cross(&e2);
    let d_delta_e2 = e1.cross(dir);
    let d_pu_s = dir.cross(&e2);
    let d_pu_e2 = s.cross(dir);
    let d_pv_s = e1.cross(dir);
    let d_pv_e1 = dir.cross(&s);

    // quotient rule, then map (s, e1, e2) back to (a, b, c)
    let du_s = d_pu_s / delta;
    let du_e1 = -d_delta_e1 * (u / delta);
    let du_e2 = (d_pu_e2 - d_delta_e2 * u) / delta;
    let dv_s = d_pv_s / delta;
    let dv_e1 = (d_pv_e1 - d_delta_e1 * v) / delta;
    let dv_e2 = -d_delta_e2 * (v / delta);

    let du = [-(du_s + du_e1 + du_e2), du_e1, du_e2];
    let dv = [-(dv_s + dv_e1 + dv_e2), dv_e1, dv_e2];
    let dw0 = [-(du[0] + dv[0]), -(du[1] + dv[1]), -(du[2] + dv[2])];
    ([1.0 - u - v, u, v], [dw0, du, dv])
}
