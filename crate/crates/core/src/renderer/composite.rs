use rayon::prelude::*;

use super::{HitList, Image, VertexAttributes};
use crate::error::{invalid, Result};
use crate::geometry::{ray_barycentric, ray_barycentric_with_grad};
use crate::lattice::TetGrid;
use crate::Vec3;

/// Gradients of a scalar loss with respect to the renderer inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeGrad {
    pub colors: Vec<[f64; 3]>,
    /// With respect to visibility `D`.
    pub visibility: Vec<f64>,
    /// With respect to `ℓ` where `D = logistic(ℓ)`.
    pub visibility_logits: Vec<f64>,
    pub offsets: Vec<Vec3>,
}

fn check_attrs(attrs: &VertexAttributes, grid: &TetGrid) -> Result<()> {
    let n = grid.vertex_count();
    if attrs.colors.len() != n || attrs.visibility.len() != n {
        return Err(invalid(format!(
            "attributes sized {}/{} for {n} vertices",
            attrs.colors.len(),
            attrs.visibility.len()
        )));
    }
    Ok(())
}

#[inline]
fn interpolate(w: &[f64; 3], verts: &[usize; 3], attrs: &VertexAttributes) -> (f64, [f64; 3]) {
    let mut d = 0.0;
    let mut c = [0.0; 3];
    for i in 0..3 {
        d += w[i] * attrs.visibility[verts[i]];
        let ci = attrs.colors[verts[i]];
        for ch in 0..3 {
            c[ch] += w[i] * ci[ch];
        }
    }
    (d, c)
}

/// Front-to-back blend of every pixel's crossings. Output is not clamped.
pub fn composite(hits: &HitList, attrs: &VertexAttributes, grid: &TetGrid) -> Result<Image> {
    check_attrs(attrs, grid)?;
    let positions = grid.deformed_positions();
    let pixels: Vec<([f64; 3], f64)> = hits
        .hits
        .par_iter()
        .zip(&hits.rays)
        .map(|(list, (o, d))| {
            let mut transmittance = 1.0;
            let mut mask = 0.0;
            let mut rgb = [0.0; 3];
            for hit in list {
                let verts = grid.faces[hit.face];
                let w = ray_barycentric(o, d, &verts.map(|v| positions[v]));
                let (vis, color) = interpolate(&w, &verts, attrs);
                let m = transmittance * vis;
                mask += m;
                for ch in 0..3 {
                    rgb[ch] += m * color[ch];
                }
                transmittance *= 1.0 - vis;
            }
            (rgb, mask)
        })
        .collect();
    Ok(Image {
        width: hits.width,
        height: hits.height,
        rgb: pixels.iter().map(|p| p.0).collect(),
        mask: Some(pixels.iter().map(|p| p.1).collect()),
    })
}

struct Contribution {
    verts: [usize; 3],
    weights: [f64; 3],
    d_vis: f64,
    d_color: [f64; 3],
    d_pos: [Vec3; 3],
}

/// Reverse-mode gradients of `Σ_j grad_rgb_j · R_j + grad_mask_j · M_j`.
///
/// The hit set and its ordering are held fixed; position gradients flow only
/// through the barycentric weights of each crossing.
pub fn composite_backward(
    hits: &HitList,
    attrs: &VertexAttributes,
    grid: &TetGrid,
    grad_rgb: &[[f64; 3]],
    grad_mask: &[f64],
) -> Result<CompositeGrad> {
    check_attrs(attrs, grid)?;
    let npix = hits.hits.len();
    if grad_rgb.len() != npix || grad_mask.len() != npix {
        return Err(invalid("upstream gradient size does not match the hit list"));
    }
    let positions = grid.deformed_positions();
    let per_pixel: Vec<Vec<Contribution>> = (0..npix)
        .into_par_iter()
        .map(|pix| {
            let list = &hits.hits[pix];
            let g_rgb = grad_rgb[pix];
            let g_mask = grad_mask[pix];
            if list.is_empty() || (g_mask == 0.0 && g_rgb == [0.0; 3]) {
                return Vec::new();
            }
            let (o, d) = &hits.rays[pix];
            let mut state = Vec::with_capacity(list.len());
            let mut transmittance = 1.0;
            for hit in list {
                let verts = grid.faces[hit.face];
                let (w, dw) = ray_barycentric_with_grad(o, d, &verts.map(|v| positions[v]));
                let (vis, color) = interpolate(&w, &verts, attrs);
                state.push((verts, w, dw, vis, color, transmittance));
                transmittance *= 1.0 - vis;
            }
            // suffix sums of what lies behind each crossing
            let mut behind_rgb = [0.0; 3];
            let mut behind_mask = 0.0;
            let mut out = Vec::with_capacity(state.len());
            for (verts, w, dw, vis, color, trans) in state.into_iter().rev() {
                let mut d_vis = g_mask * (1.0 - behind_mask);
                for ch in 0..3 {
                    d_vis += g_rgb[ch] * (color[ch] - behind_rgb[ch]);
                }
                d_vis *= trans;
                let m = trans * vis;
                let d_color = g_rgb.map(|g| g * m);
                let mut d_pos = [Vec3::zeros(); 3];
                for i in 0..3 {
                    let ci = attrs.colors[verts[i]];
                    let g_w = d_vis * attrs.visibility[verts[i]]
                        + d_color[0] * ci[0]
                        + d_color[1] * ci[1]
                        + d_color[2] * ci[2];
                    if g_w != 0.0 {
                        for (x, dwx) in dw[i].iter().enumerate() {
                            d_pos[x] += dwx * g_w;
                        }
                    }
                }
                for ch in 0..3 {
                    behind_rgb[ch] = vis * color[ch] + (1.0 - vis) * behind_rgb[ch];
                }
                behind_mask = vis + (1.0 - vis) * behind_mask;
                out.push(Contribution {
                    verts,
                    weights: w,
                    d_vis,
                    d_color,
                    d_pos,
                });
            }
            out
        })
        .collect();

    let n = grid.vertex_count();
    let mut grad = CompositeGrad {
        colors: vec![[0.0; 3]; n],
        visibility: vec![0.0; n],
        visibility_logits: vec![0.0; n],
        offsets: vec![Vec3::zeros(); n],
    };
    for c in per_pixel.iter().flatten() {
        for i in 0..3 {
            let v = c.verts[i];
            grad.visibility[v] += c.weights[i] * c.d_vis;
            for ch in 0..3 {
                grad.colors[v][ch] += c.weights[i] * c.d_color[ch];
            }
            grad.offsets[v] += c.d_pos[i];
        }
    }
    for v in 0..n {
        let d = attrs.visibility[v];
        grad.visibility_logits[v] = grad.visibility[v] * d * (1.0 - d);
    }
    Ok(grad)
}
