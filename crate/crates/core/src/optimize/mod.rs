//! Gradient-descent drivers for tetrahedral meshing and multi-view
//! reconstruction, and the Laplace smoothing post-process.

mod adam;
mod mesh;
mod multiview;
mod smooth;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, OptimizerConfig, OptimizerKind, OptimizerState, ParamBlock};
pub use mesh::{mesh_optimize, MeshOutcome};
pub use multiview::{multiview_optimize, MultiviewOutcome, MultiviewSettings};
pub use smooth::laplacian_smooth;

use crate::metrics::Psnr;
use crate::Vec3;

/// Options shared by both drivers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriverSettings {
    pub optimizer: OptimizerConfig,
    /// Limit each offset to half a cell after every step.
    pub clamp_offsets: bool,
    /// Keep vertices on the domain boundary at their rest positions.
    pub pin_boundary: bool,
}

impl Default for DriverSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            clamp_offsets: true,
            pin_boundary: true,
        }
    }
}

/// One optimizer iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub total: f64,
    /// Unweighted term values.
    pub terms: Vec<(&'static str, f64)>,
    /// Flipped tets at the evaluated state.
    pub flipped: usize,
    pub elapsed_ms: f64,
    /// Per-view PSNR of the evaluated renders (multi-view only).
    pub psnr: Vec<Psnr>,
}

impl TraceRecord {
    /// Single-line `key=value` rendering.
    pub fn to_line(&self) -> String {
        let mut line = format!("iter={} total={:.9e}", self.iteration, self.total);
        for (name, value) in &self.terms {
            let _ = write!(line, " {name}={value:.9e}");
        }
        let _ = write!(line, " flipped={} elapsed_ms={:.3}", self.flipped, self.elapsed_ms);
        if !self.psnr.is_empty() {
            let views: Vec<String> = self
                .psnr
                .iter()
                .map(|p| match p {
                    Psnr::Exact => "exact".to_string(),
                    Psnr::Db(x) => format!("{x:.4}"),
                })
                .collect();
            let _ = write!(line, " psnr={}", views.join(","));
        }
        line
    }
}

/// Per-iteration records of one optimization run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn to_lines(&self) -> String {
        self.records.iter().map(|r| r.to_line() + "\n").collect()
    }

    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total).collect()
    }
}

fn flatten(v: &[Vec3]) -> Vec<f64> {
    v.iter().flat_map(|p| [p.x, p.y, p.z]).collect()
}

fn unflatten(v: &[f64]) -> Vec<Vec3> {
    v.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect()
}

fn pin(grad: &mut [Vec3], boundary: &[bool]) {
    for (g, &b) in grad.iter_mut().zip(boundary) {
        if b {
            *g = Vec3::zeros();
        }
    }
}

fn clamp_norm(offsets: &mut [Vec3], max: f64) {
    for o in offsets.iter_mut() {
        let n = o.norm();
        if n > max {
            *o *= max / n;
        }
    }
}
