//! Differentiable ray-cast renderer for the deformed lattice.
//!
//! Every pixel shoots one ray through its center and collects all faces it
//! crosses, nearest first. Each crossing interpolates vertex color `C` and
//! visibility `D` with the barycentric weights of the crossing point, and
//! the crossings are blended front to back:
//!
//! ```text
//! m_k = D_k · Π_{i<k} (1 - D_i),   M = Σ m_k,   R = Σ m_k C_k
//! ```
//!
//! The backward pass holds the hit set and its ordering fixed and
//! differentiates through the barycentric weights, so gradients reach
//! colors, visibilities and vertex positions.

mod camera;
mod composite;

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{ray_triangle_intersect, Bvh};
use crate::lattice::{surface_candidate_faces, TetGrid};
use crate::occupancy::OccupancyField;
use crate::Vec3;

pub use camera::Camera;
pub use composite::{composite, composite_backward, CompositeGrad};

/// Faces whose three vertex visibilities are all below this are skipped
/// when culling is enabled.
pub const CULL_VISIBILITY: f64 = 1e-3;

/// Per-vertex color and visibility.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexAttributes {
    pub colors: Vec<[f64; 3]>,
    /// Visibility `D` in `[0, 1]`.
    pub visibility: Vec<f64>,
}

impl VertexAttributes {
    pub fn uniform(n: usize, color: [f64; 3], visibility: f64) -> Self {
        Self {
            colors: vec![color; n],
            visibility: vec![visibility; n],
        }
    }

    pub fn len(&self) -> usize {
        self.visibility.len()
    }

    pub fn is_empty(&self) -> bool {
        self.visibility.is_empty()
    }
}

/// RGB image with an optional mask channel, row-major from the top-left.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f64; 3]>,
    pub mask: Option<Vec<f64>>,
}

impl Image {
    /// Black image with an all-zero mask.
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![[0.0; 3]; width * height],
            mask: Some(vec![0.0; width * height]),
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn clamped(mut self) -> Self {
        for px in &mut self.rgb {
            for c in px.iter_mut() {
                *c = c.clamp(0.0, 1.0);
            }
        }
        if let Some(mask) = &mut self.mask {
            for m in mask.iter_mut() {
                *m = m.clamp(0.0, 1.0);
            }
        }
        self
    }
}

/// One ray-face crossing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Index into `TetGrid::faces`.
    pub face: usize,
    pub t: f64,
    /// Weights of `TetGrid::faces[face]`'s vertices at the crossing.
    pub barycentric: [f64; 3],
}

/// Ordered crossings for every pixel of one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct HitList {
    pub width: usize,
    pub height: usize,
    /// Ray `(origin, direction)` per pixel.
    pub rays: Vec<(Vec3, Vec3)>,
    /// Crossings per pixel in ascending `t`, ties broken by face index.
    pub hits: Vec<Vec<Hit>>,
}

impl HitList {
    pub fn total_hits(&self) -> usize {
        self.hits.iter().map(Vec::len).sum()
    }
}

fn camera_rays(camera: &Camera) -> Vec<(Vec3, Vec3)> {
    (0..camera.height)
        .flat_map(|y| (0..camera.width).map(move |x| (x, y)))
        .map(|(x, y)| camera.pixel_ray(x, y))
        .collect()
}

/// Casts one ray per pixel against the given faces of the deformed grid.
pub fn cast_rays(grid: &TetGrid, faces: &[usize], camera: &Camera) -> HitList {
    let positions = grid.deformed_positions();
    let tris: Vec<[Vec3; 3]> = faces.iter().map(|&f| grid.faces[f].map(|v| positions[v])).collect();
    let bvh = Bvh::build(tris);
    let rays = camera_rays(camera);
    let hits = rays
        .par_iter()
        .map(|(o, d)| {
            let mut local: Vec<Hit> = Vec::new();
            bvh.for_each_hit(o, d, |i, h| {
                local.push(Hit {
                    face: faces[i],
                    t: h.t,
                    barycentric: h.barycentric,
                })
            });
            sort_pixel_hits(&mut local);
            local
        })
        .collect();
    HitList {
        width: camera.width,
        height: camera.height,
        rays,
        hits,
    }
}

/// Reference implementation of [`cast_rays`]: every ray against every face.
pub fn cast_rays_brute_force(grid: &TetGrid, faces: &[usize], camera: &Camera) -> HitList {
    let positions = grid.deformed_positions();
    let rays = camera_rays(camera);
    let hits = rays
        .iter()
        .map(|(o, d)| {
            let mut local: Vec<Hit> = faces
                .iter()
                .filter_map(|&f| {
                    let tri = grid.faces[f].map(|v| positions[v]);
                    ray_triangle_intersect(o, d, &tri).map(|h| Hit {
                        face: f,
                        t: h.t,
                        barycentric: h.barycentric,
                    })
                })
                .collect();
            sort_pixel_hits(&mut local);
            local
        })
        .collect();
    HitList {
        width: camera.width,
        height: camera.height,
        rays,
        hits,
    }
}

fn sort_pixel_hits(hits: &mut [Hit]) {
    hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
}

/// Faces considered by the soft renderer.
pub fn soft_render_faces(grid: &TetGrid, attrs: &VertexAttributes, cull: bool) -> Vec<usize> {
    (0..grid.face_count())
        .filter(|&f| !cull || grid.faces[f].iter().any(|&v| attrs.visibility[v] >= CULL_VISIBILITY))
        .collect()
}

pub enum RenderMode<'a> {
    /// Differentiable compositing of every lattice face.
    Soft {
        attributes: &'a VertexAttributes,
        cull: bool,
    },
    /// Opaque, flat-shaded nearest hit on the extracted surface.
    Hard {
        occupancy: &'a OccupancyField,
        threshold: f64,
    },
}

/// Renders an image; colors and mask are clamped to `[0, 1]`.
pub fn render(grid: &TetGrid, camera: &Camera, mode: RenderMode<'_>) -> Result<Image> {
    camera.validate(1e-9)?;
    match mode {
        RenderMode::Soft { attributes, cull } => {
            let faces = soft_render_faces(grid, attributes, cull);
            let hits = cast_rays(grid, &faces, camera);
            Ok(composite(&hits, attributes, grid)?.clamped())
        }
        RenderMode::Hard {
            occupancy,
            threshold,
        } => {
            let surface = surface_candidate_faces(grid, occupancy, threshold)?;
            let faces: Vec<usize> = surface.iter().map(|f| f.face).collect();
            let hits = cast_rays(grid, &faces, camera);
            let positions = grid.deformed_positions();
            let mut image = Image::new(camera.width, camera.height);
            let mask = image.mask.as_mut().expect("new images carry a mask");
            for (pix, list) in hits.hits.iter().enumerate() {
                if let Some(first) = list.first() {
                    let [a, b, c] = grid.faces[first.face].map(|v| positions[v]);
                    let n = (b - a).cross(&(c - a)).normalize();
                    let shade = n.dot(&hits.rays[pix].1.normalize()).abs();
                    image.rgb[pix] = [shade; 3];
                    mask[pix] = 1.0;
                }
            }
            Ok(image.clamped())
        }
    }
}
