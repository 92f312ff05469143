use std::time::Instant;

use log::{debug, info};

use super::{clamp_norm, flatten, pin, unflatten, DriverSettings, Trace, TraceRecord};
use crate::energies::{sample_faces, total_loss, EnergyConfig, ReconInputs};
use crate::error::{invalid, Error, Result};
use crate::geometry::{sample_surface, SurfaceMesh};
use crate::lattice::{surface_candidate_faces, TetGrid};
use crate::occupancy::{count_flipped, label_occupancy, OccupancyField};
use crate::optimize::{adam_step, OptimizerState};

/// Result of [`mesh_optimize`].
#[derive(Clone, Debug)]
pub struct MeshOutcome {
    pub grid: TetGrid,
    /// Labels of the final deformed grid.
    pub occupancy: OccupancyField,
    pub trace: Trace,
}

/// Fits the lattice to a closed target surface.
///
/// Alternates winding-number relabeling of the deformed tets (every
/// `relabel_every` iterations) with optimizer steps on the offsets against
/// the surface distance and the regularizers. Target samples are drawn once;
/// samples on the candidate faces are redrawn at every relabeling.
pub fn mesh_optimize(
    grid: &TetGrid,
    target: &SurfaceMesh,
    energy: &EnergyConfig,
    settings: &DriverSettings,
    iterations: usize,
    relabel_every: usize,
) -> Result<MeshOutcome> {
    if iterations == 0 || relabel_every == 0 {
        return Err(invalid("iterations and relabel_every must be at least 1"));
    }
    energy.validate()?;
    let holes = target.unmatched_edges();
    if holes > 0 {
        log::warn!("target surface is not closed ({holes} unmatched edges); occupancy labels may be unreliable");
    }
    let start = Instant::now();
    let mut grid = grid.clone();
    let target_samples = sample_surface(target, energy.sample_count_target, energy.seed)?;
    let mut state = OptimizerState::new(settings.optimizer.clone(), &[(settings.optimizer.lr, 3 * grid.vertex_count())])?;
    let max_offset = 0.5 * grid.cell_size();
    let mut trace = Trace::default();
    let mut faces = Vec::new();
    let mut predicted = None;

    for iteration in 0..iterations {
        if iteration % relabel_every == 0 {
            let occ = label_occupancy(&grid, target)?;
            faces = surface_candidate_faces(&grid, &occ, 0.5)?;
            if faces.is_empty() {
                return Err(Error::NoSurface(format!(
                    "iteration {iteration}: {} of {} tets occupied and no surface faces; \
                     is the target inside the unit cube?",
                    occ.occupied_count(0.5),
                    grid.tet_count()
                )));
            }
            predicted = Some(sample_faces(&grid, &faces, energy.sample_count_pred, energy.seed)?);
            debug!("iteration {iteration}: relabeled, {} surface faces", faces.len());
        }
        let report = total_loss(
            &grid,
            energy,
            ReconInputs::Surface {
                faces: &faces,
                target: &target_samples,
                predicted: predicted.as_ref().expect("drawn at iteration 0"),
                occupancy: None,
            },
        )?;
        let mut grad = report.grad_offsets;
        if settings.pin_boundary {
            pin(&mut grad, &grid.boundary_vertices);
        }
        trace.records.push(TraceRecord {
            iteration,
            total: report.total,
            terms: report.terms.iter().map(|(k, t)| (*k, t.value)).collect(),
            flipped: count_flipped(&grid),
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            psnr: Vec::new(),
        });
        let mut params = flatten(&grid.offsets);
        adam_step(&mut state, &mut [&mut params], &[&flatten(&grad)], report.total)?;
        let mut offsets = unflatten(&params);
        if settings.clamp_offsets {
            clamp_norm(&mut offsets, max_offset);
        }
        grid.offsets = offsets;
    }
    let occupancy = label_occupancy(&grid, target)?;
    info!(
        "mesh optimization: {iterations} iterations, final loss {:.6e}, {} flipped tets",
        trace.records.last().map_or(0.0, |r| r.total),
        count_flipped(&grid)
    );
    Ok(MeshOutcome { grid, occupancy, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::icosphere;
    use crate::lattice::{build_lattice, extract_surface};
    use crate::Vec3;

    #[test]
    fn own_surface_is_a_fixed_point() {
        let grid = build_lattice(4).unwrap();
        let sphere = icosphere(Vec3::repeat(0.5), 0.3, 2);
        let occ = label_occupancy(&grid, &sphere).unwrap();
        let target = extract_surface(&grid, &occ, 0.5).unwrap();
        let energy = EnergyConfig {
            lambda_sm: 0.0,
            sample_count_target: 400,
            sample_count_pred: 400,
            ..EnergyConfig::default()
        };
        let out = mesh_optimize(&grid, &target, &energy, &DriverSettings::default(), 40, 10).unwrap();
        let max = out.grid.offsets.iter().map(|o| o.norm()).fold(0.0, f64::max);
        assert!(max < 1e-3, "max offset {max}");
        let first = &out.trace.records[0];
        let surf = first.terms.iter().find(|(k, _)| *k == "surf").unwrap().1;
        assert!(surf < 1e-20, "{surf}");
        assert!(out.grid.same_topology(&grid));
        assert_eq!(out.occupancy.values, occ.values);
    }

    #[test]
    fn empty_labeling_is_reported() {
        let grid = build_lattice(3).unwrap();
        let far = icosphere(Vec3::repeat(5.0), 0.2, 1);
        let err = mesh_optimize(&grid, &far, &EnergyConfig::default(), &DriverSettings::default(), 5, 5);
        assert!(matches!(err, Err(Error::NoSurface(_))));
    }

    #[test]
    fn loss_decreases_and_runs_repeat_exactly() {
        let grid = build_lattice(4).unwrap();
        let sphere = icosphere(Vec3::repeat(0.5), 0.33, 2);
        let energy = EnergyConfig {
            sample_count_target: 500,
            sample_count_pred: 500,
            ..EnergyConfig::default()
        };
        let settings = DriverSettings {
            optimizer: crate::optimize::OptimizerConfig {
                lr: 3e-3,
                ..Default::default()
            },
            ..DriverSettings::default()
        };
        let a = mesh_optimize(&grid, &sphere, &energy, &settings, 60, 20).unwrap();
        let b = mesh_optimize(&grid, &sphere, &energy, &settings, 60, 20).unwrap();
        assert!(a.grid.offsets.iter().zip(&b.grid.offsets).all(|(x, y)| x == y));
        let totals = a.trace.totals();
        let head: f64 = totals[..10].iter().sum();
        let tail: f64 = totals[50..].iter().sum();
        assert!(tail < head, "{head} -> {tail}");
        assert!(a.grid.same_topology(&grid));
        assert!(a.grid.offsets.iter().all(|o| o.norm() <= 0.5 * grid.cell_size() + 1e-15));
        for (v, o) in a.grid.offsets.iter().enumerate() {
            if grid.boundary_vertices[v] {
                assert_eq!(o.norm(), 0.0);
            }
        }
        assert!(a.trace.to_lines().lines().count() == 60);
    }
}
