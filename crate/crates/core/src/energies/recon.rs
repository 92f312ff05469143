//! Reconstruction terms: occupancy cross-entropy, two-sided surface
//! distance, and the L1 image loss.

use rayon::prelude::*;

use super::Gradient;
use crate::error::{invalid, Error, Result};
use crate::geometry::{closest_point_grad, Bvh, SampleSet};
use crate::lattice::{face_triangles, SurfaceFace, TetGrid};
use crate::occupancy::{OccupancyField, OccupancyMode};
use crate::renderer::Image;
use crate::Vec3;

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` inside logarithms.
pub const PROB_EPS: f64 = 1e-7;

/// Negative log-likelihood of hard labels under soft occupancies,
/// `−Σ_k [Ô_k ln O_k + (1 − Ô_k) ln(1 − O_k)]`, and its gradient with
/// respect to the logits of `O` (which is `O_k − Ô_k`).
pub fn occupancy_bce(occ: &OccupancyField, labels: &OccupancyField) -> Result<(f64, Vec<f64>)> {
    if occ.mode != OccupancyMode::Soft || labels.mode != OccupancyMode::Hard {
        return Err(invalid("occupancy_bce expects soft predictions and hard labels"));
    }
    if occ.len() != labels.len() {
        return Err(invalid(format!(
            "{} predictions for {} labels",
            occ.len(),
            labels.len()
        )));
    }
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(occ.len());
    for (&o, &l) in occ.values.iter().zip(&labels.values) {
        let p = o.clamp(PROB_EPS, 1.0 - PROB_EPS);
        value -= l * p.ln() + (1.0 - l) * (1.0 - p).ln();
        grad.push(o - l);
    }
    Ok((value, grad))
}

/// Samples on the given surface faces of the deformed grid.
pub fn sample_faces(grid: &TetGrid, faces: &[SurfaceFace], count: usize, seed: u64) -> Result<SampleSet> {
    crate::geometry::sample_triangles(&face_triangles(&grid.deformed_positions(), faces), count, seed)
}

/// Two-sided squared distance between the face set `faces` and target
/// samples:
///
/// `Σ_{p∈target} min_f d²(p, f) + Σ_{q∈predicted} min_{p∈target} ‖p − q‖²`
///
/// `predicted` must come from [`sample_faces`] on the same face list; its
/// points follow the faces through their fixed barycentric coordinates.
/// Nearest-neighbor assignments are frozen for the gradient.
pub fn surface_loss(
    grid: &TetGrid,
    faces: &[SurfaceFace],
    target: &SampleSet,
    predicted: &SampleSet,
) -> Result<Gradient> {
    if faces.is_empty() {
        return Err(Error::NoSurface("surface loss needs at least one face".into()));
    }
    if target.is_empty() || predicted.is_empty() {
        return Err(invalid("surface loss needs non-empty sample sets"));
    }
    let (Some(src), Some(bary)) = (&predicted.source_face, &predicted.barycentrics) else {
        return Err(invalid("predicted samples must carry source faces and barycentrics"));
    };
    if let Some(&bad) = src.iter().find(|&&f| f >= faces.len()) {
        return Err(invalid(format!("sample source face {bad} out of range")));
    }
    let pos = grid.deformed_positions();
    let tris = face_triangles(&pos, faces);
    let bvh = Bvh::build(tris.clone());

    let to_faces: Vec<_> = target
        .points
        .par_iter()
        .map(|p| {
            let (f, cp) = bvh.nearest(p).expect("non-empty face set");
            (f, cp.sq_distance, closest_point_grad(p, &cp))
        })
        .collect();

    let moved: Vec<Vec3> = src
        .iter()
        .zip(bary)
        .map(|(&f, w)| tris[f][0] * w[0] + tris[f][1] * w[1] + tris[f][2] * w[2])
        .collect();
    let to_samples: Vec<(f64, Vec3)> = moved
        .par_iter()
        .map(|q| {
            let mut best = (f64::INFINITY, Vec3::zeros());
            for p in &target.points {
                let d = (q - p).norm_squared();
                if d < best.0 {
                    best = (d, *p);
                }
            }
            (best.0, (q - best.1) * 2.0)
        })
        .collect();

    let mut value = 0.0;
    let mut grad = vec![Vec3::zeros(); grid.vertex_count()];
    for (f, d2, g) in &to_faces {
        value += d2;
        for i in 0..3 {
            grad[faces[*f].vertices[i]] += g.triangle[i];
        }
    }
    for ((&f, w), (d2, g)) in src.iter().zip(bary).zip(&to_samples) {
        value += d2;
        for i in 0..3 {
            grad[faces[f].vertices[i]] += g * w[i];
        }
    }
    Ok(Gradient { value, grad })
}

/// L1 image loss and its subgradient with respect to the rendered image.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageLoss {
    pub value: f64,
    pub grad_rgb: Vec<[f64; 3]>,
    pub grad_mask: Vec<f64>,
}

/// Unweighted color and mask parts of the image loss.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageLossParts {
    pub rgb: f64,
    pub mask: f64,
    pub grad_rgb: Vec<[f64; 3]>,
    pub grad_mask: Vec<f64>,
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Color and mask L1 distances. The mask part is zero when the reference
/// carries no mask; a rendered image without a mask counts as empty.
pub fn image_loss_parts(rendered: &Image, reference: &Image) -> Result<ImageLossParts> {
    if rendered.width != reference.width || rendered.height != reference.height {
        return Err(invalid(format!(
            "rendered {}x{} vs reference {}x{}",
            rendered.width, rendered.height, reference.width, reference.height
        )));
    }
    let n = rendered.pixel_count();
    let mut rgb = 0.0;
    let mut grad_rgb = vec![[0.0; 3]; n];
    for (j, (r, g)) in rendered.rgb.iter().zip(&reference.rgb).enumerate() {
        for ch in 0..3 {
            rgb += (r[ch] - g[ch]).abs();
            grad_rgb[j][ch] = sign(r[ch] - g[ch]);
        }
    }
    let mut mask = 0.0;
    let mut grad_mask = vec![0.0; n];
    if let Some(ref_mask) = &reference.mask {
        for j in 0..n {
            let m = rendered.mask.as_ref().map_or(0.0, |m| m[j]);
            mask += (m - ref_mask[j]).abs();
            grad_mask[j] = sign(m - ref_mask[j]);
        }
    }
    Ok(ImageLossParts {
        rgb,
        mask,
        grad_rgb,
        grad_mask,
    })
}

/// `Σ_j ‖R_j^ref − R_j‖₁ + λ_mask |M_j^ref − M_j|`.
pub fn image_loss(rendered: &Image, reference: &Image, lambda_mask: f64) -> Result<ImageLoss> {
    let parts = image_loss_parts(rendered, reference)?;
    Ok(ImageLoss {
        value: parts.rgb + lambda_mask * parts.mask,
        grad_rgb: parts.grad_rgb,
        grad_mask: parts.grad_mask.iter().map(|g| g * lambda_mask).collect(),
    })
}
