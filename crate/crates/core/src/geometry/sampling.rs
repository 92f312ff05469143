use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{triangle_area, SurfaceMesh};
use crate::error::{Error, Result};
use crate::Vec3;

/// Points drawn from a surface.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec3>,
    /// Triangle each point was drawn from, when known.
    pub source_face: Option<Vec<usize>>,
    /// Barycentric coordinates of each point on its source triangle.
    pub barycentrics: Option<Vec<[f64; 3]>>,
    pub seed: u64,
}

impl SampleSet {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self {
            points,
            source_face: None,
            barycentrics: None,
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Area-weighted uniform samples over a triangle soup.
pub fn sample_triangles(tris: &[[Vec3; 3]], count: usize, seed: u64) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(tris.len());
    let mut total = 0.0;
    for t in tris {
        total += triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::DegenerateGeometry(
            "surface has zero total area".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    let mut faces = Vec::with_capacity(count);
    let mut barys = Vec::with_capacity(count);
    for _ in 0..count {
        let target = rng.gen::<f64>() * total;
        let face = cumulative
            .partition_point(|&c| c <= target)
            .min(tris.len() - 1);
        let s = rng.gen::<f64>().sqrt();
        let r2 = rng.gen::<f64>();
        let bary = [1.0 - s, s * (1.0 - r2), s * r2];
        let [a, b, c] = &tris[face];
        points.push(a * bary[0] + b * bary[1] + c * bary[2]);
        faces.push(face);
        barys.push(bary);
    }
    Ok(SampleSet {
        points,
        source_face: Some(faces),
        barycentrics: Some(barys),
        seed,
    })
}

pub fn sample_surface(surface: &SurfaceMesh, count: usize, seed: u64) -> Result<SampleSet> {
    sample_triangles(&surface.triangle_soup(), count, seed)
}
