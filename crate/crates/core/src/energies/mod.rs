//! Loss terms with analytic gradients, and their weighted sum.
//!
//! Every term returns its value together with the gradient with respect to
//! the vertex offsets (and, where applicable, occupancy logits, visibility
//! logits and colors). Nearest-point assignments and ray hit lists are
//! recomputed on every call and held fixed while differentiating.

mod recon;
mod regularizers;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use recon::{
    image_loss, image_loss_parts, occupancy_bce, sample_faces, surface_loss, ImageLoss, ImageLossParts,
    PROB_EPS,
};
pub use regularizers::{
    amips_energy, amips_loss, delta_loss, equivolume_loss, laplacian_loss, smoothness_loss,
    AMIPS_BARRIER, AMIPS_BARRIER_SLOPE, AMIPS_DET_EPS,
};

use crate::error::{invalid, Result};
use crate::geometry::SampleSet;
use crate::lattice::{SurfaceFace, TetGrid};
use crate::occupancy::OccupancyField;
use crate::renderer::{cast_rays, composite, composite_backward, soft_render_faces, Camera, Image, VertexAttributes};
use crate::Vec3;

/// A scalar loss and its gradient with respect to the vertex offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub value: f64,
    pub grad: Vec<Vec3>,
}

/// Loss weights and sampling parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub lambda_recon: f64,
    pub lambda_surf: f64,
    pub lambda_lap: f64,
    pub lambda_del: f64,
    pub lambda_vol: f64,
    pub lambda_amips: f64,
    pub lambda_sm: f64,
    pub lambda_mask: f64,
    pub sample_count_target: usize,
    pub sample_count_pred: usize,
    pub seed: u64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            lambda_recon: 1.0,
            lambda_surf: 1.0,
            lambda_lap: 0.1,
            lambda_del: 0.01,
            lambda_vol: 0.05,
            lambda_amips: 1e-4,
            lambda_sm: 0.01,
            lambda_mask: 1.0,
            sample_count_target: 3000,
            sample_count_pred: 3000,
            seed: 0,
        }
    }
}

impl EnergyConfig {
    /// Every weight is zero.
    pub fn zero_weights() -> Self {
        Self {
            lambda_recon: 0.0,
            lambda_surf: 0.0,
            lambda_lap: 0.0,
            lambda_del: 0.0,
            lambda_vol: 0.0,
            lambda_amips: 0.0,
            lambda_sm: 0.0,
            lambda_mask: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda_recon", self.lambda_recon),
            ("lambda_surf", self.lambda_surf),
            ("lambda_lap", self.lambda_lap),
            ("lambda_del", self.lambda_del),
            ("lambda_vol", self.lambda_vol),
            ("lambda_amips", self.lambda_amips),
            ("lambda_sm", self.lambda_sm),
            ("lambda_mask", self.lambda_mask),
        ];
        for (name, w) in weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(invalid(format!("{name} must be a finite non-negative number, got {w}")));
            }
        }
        if self.sample_count_target == 0 || self.sample_count_pred == 0 {
            return Err(invalid("sample counts must be positive"));
        }
        Ok(())
    }
}

/// One weighted entry of an [`EnergyReport`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Term {
    pub weight: f64,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct EnergyReport {
    /// Evaluated terms by name. Terms with zero weight are not evaluated.
    pub terms: BTreeMap<&'static str, Term>,
    pub total: f64,
    pub grad_offsets: Vec<Vec3>,
    pub grad_occ_logits: Option<Vec<f64>>,
    pub grad_visibility_logits: Option<Vec<f64>>,
    pub grad_colors: Option<Vec<[f64; 3]>>,
    /// Renders clamped to `[0, 1]`, one per view, in image mode.
    pub rendered: Vec<Image>,
}

impl EnergyReport {
    fn new(grid: &TetGrid) -> Self {
        Self {
            terms: BTreeMap::new(),
            total: 0.0,
            grad_offsets: vec![Vec3::zeros(); grid.vertex_count()],
            grad_occ_logits: None,
            grad_visibility_logits: None,
            grad_colors: None,
            rendered: Vec::new(),
        }
    }

    fn add(&mut self, name: &'static str, weight: f64, term: Gradient) {
        self.total += weight * term.value;
        for (acc, g) in self.grad_offsets.iter_mut().zip(&term.grad) {
            *acc += g * weight;
        }
        self.terms.insert(name, Term { weight, value: term.value });
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.terms.get(name).map(|t| t.value)
    }
}

/// Soft occupancies and the hard labels they are fit to.
#[derive(Clone, Copy, Debug)]
pub struct OccupancyTarget<'a> {
    pub predicted: &'a OccupancyField,
    pub labels: &'a OccupancyField,
}

/// Inputs of the reconstruction term.
#[derive(Clone, Copy, Debug)]
pub enum ReconInputs<'a> {
    /// 3D supervision: candidate faces, target samples and samples on the
    /// candidate faces drawn by [`sample_faces`].
    Surface {
        faces: &'a [SurfaceFace],
        target: &'a SampleSet,
        predicted: &'a SampleSet,
        occupancy: Option<OccupancyTarget<'a>>,
    },
    /// 2D supervision: reference images with their cameras.
    Images {
        views: &'a [(Image, Camera)],
        attributes: &'a VertexAttributes,
        cull: bool,
    },
}

/// Weighted sum of the reconstruction term and the regularizers.
///
/// Term names: `occ`, `surf` (surface mode), `image_rgb`, `image_mask`
/// (image mode), `lap`, `del`, `vol`, `amips`, and `sm` (surface mode only).
pub fn total_loss(grid: &TetGrid, config: &EnergyConfig, inputs: ReconInputs<'_>) -> Result<EnergyReport> {
    config.validate()?;
    let mut report = EnergyReport::new(grid);
    let lr = config.lambda_recon;
    match inputs {
        ReconInputs::Surface {
            faces,
            target,
            predicted,
            occupancy,
        } => {
            if let Some(occ) = occupancy {
                if occ.predicted.len() != grid.tet_count() {
                    return Err(invalid("occupancy size does not match the grid"));
                }
                if lr > 0.0 {
                    let (value, grad) = occupancy_bce(occ.predicted, occ.labels)?;
                    report.total += lr * value;
                    report.terms.insert("occ", Term { weight: lr, value });
                    report.grad_occ_logits = Some(grad.iter().map(|g| g * lr).collect());
                } else {
                    report.grad_occ_logits = Some(vec![0.0; grid.tet_count()]);
                }
            }
            let ws = lr * config.lambda_surf;
            if ws > 0.0 {
                report.add("surf", ws, surface_loss(grid, faces, target, predicted)?);
            }
            if config.lambda_sm > 0.0 {
                report.add("sm", config.lambda_sm, smoothness_loss(grid, faces)?);
            }
        }
        ReconInputs::Images {
            views,
            attributes,
            cull,
        } => {
            if views.is_empty() {
                return Err(invalid("image reconstruction needs at least one view"));
            }
            let n = grid.vertex_count();
            let mut grad_colors = vec![[0.0; 3]; n];
            let mut grad_vis = vec![0.0; n];
            let mut offsets = vec![Vec3::zeros(); n];
            let (mut rgb_value, mut mask_value) = (0.0, 0.0);
            let wm = lr * config.lambda_mask;
            let faces = soft_render_faces(grid, attributes, cull);
            for (reference, camera) in views {
                camera.validate(1e-9)?;
                let hits = cast_rays(grid, &faces, camera);
                let raw = composite(&hits, attributes, grid)?;
                let rendered = raw.clone().clamped();
                let parts = image_loss_parts(&rendered, reference)?;
                rgb_value += parts.rgb;
                mask_value += parts.mask;
                if lr > 0.0 {
                    // clamping passes gradients only inside [0, 1]
                    let inside = |x: f64| (0.0..=1.0).contains(&x);
                    let g_rgb: Vec<[f64; 3]> = parts
                        .grad_rgb
                        .iter()
                        .zip(&raw.rgb)
                        .map(|(g, r)| [0, 1, 2].map(|c| if inside(r[c]) { g[c] * lr } else { 0.0 }))
                        .collect();
                    let raw_mask = raw.mask.as_deref().unwrap_or(&[]);
                    let g_mask: Vec<f64> = parts
                        .grad_mask
                        .iter()
                        .zip(raw_mask)
                        .map(|(g, m)| if inside(*m) { g * wm } else { 0.0 })
                        .collect();
                    let back = composite_backward(&hits, attributes, grid, &g_rgb, &g_mask)?;
                    for v in 0..n {
                        for ch in 0..3 {
                            grad_colors[v][ch] += back.colors[v][ch];
                        }
                        grad_vis[v] += back.visibility_logits[v];
                        offsets[v] += back.offsets[v];
                    }
                }
                report.rendered.push(rendered);
            }
            if lr > 0.0 {
                report.total += lr * rgb_value;
                report.terms.insert("image_rgb", Term { weight: lr, value: rgb_value });
                for (acc, g) in report.grad_offsets.iter_mut().zip(&offsets) {
                    *acc += g;
                }
                if views.iter().any(|(img, _)| img.mask.is_some()) && wm > 0.0 {
                    report.total += wm * mask_value;
                    report.terms.insert("image_mask", Term { weight: wm, value: mask_value });
                }
            }
            report.grad_colors = Some(grad_colors);
            report.grad_visibility_logits = Some(grad_vis);
        }
    }
    if config.lambda_lap > 0.0 {
        report.add("lap", config.lambda_lap, laplacian_loss(grid));
    }
    if config.lambda_del > 0.0 {
        report.add("del", config.lambda_del, delta_loss(grid));
    }
    if config.lambda_vol > 0.0 {
        report.add("vol", config.lambda_vol, equivolume_loss(grid));
    }
    if config.lambda_amips > 0.0 {
        report.add("amips", config.lambda_amips, amips_loss(grid));
    }
    Ok(report)
}
