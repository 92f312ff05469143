//! Mesh quality, surface distance and image metrics.

use std::fmt;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::energies::amips_energy;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dihedral_angles, sample_surface, Bvh, SurfaceMesh};
use crate::lattice::TetGrid;
use crate::occupancy::{count_flipped, OccupancyField};
use crate::renderer::Image;
use crate::Vec3;

/// Default per-surface sample count for [`surface_distances`].
pub const DEFAULT_DISTANCE_SAMPLES: usize = 100_000;

/// Element quality over a set of tetrahedra.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Distortion {
    /// Smallest dihedral angle in degrees; 0 if any tet is degenerate.
    pub min_dihedral: f64,
    pub mean_amips: f64,
    pub max_amips: f64,
    pub tet_count: usize,
}

/// Sampled surface distances in unsquared units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurfaceDistances {
    pub hausdorff: f64,
    pub chamfer: f64,
}

/// Peak signal-to-noise ratio. Identical images have no finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Psnr {
    Exact,
    Db(f64),
}

impl Psnr {
    /// Decibels, with [`Psnr::Exact`] mapped to `+∞`.
    pub fn db(self) -> f64 {
        match self {
            Psnr::Exact => f64::INFINITY,
            Psnr::Db(x) => x,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Exact => f.write_str("exact"),
            Psnr::Db(x) => write!(f, "{x:.3} dB"),
        }
    }
}

impl Serialize for Psnr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Psnr::Exact => s.serialize_str("exact"),
            Psnr::Db(x) => s.serialize_f64(*x),
        }
    }
}

/// Flat summary written next to every generated mesh.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QualityReport {
    pub min_dihedral: f64,
    pub mean_amips: f64,
    pub max_amips: f64,
    pub flipped_count: usize,
    /// Sampled, not exact. `None` without a reference surface.
    pub hausdorff: Option<f64>,
    pub chamfer: Option<f64>,
    /// Occupied tetrahedra.
    pub tet_count: usize,
    pub vertex_count: usize,
    pub psnr: Option<Psnr>,
}

impl QualityReport {
    pub fn new(
        distortion: Distortion,
        flipped_count: usize,
        vertex_count: usize,
        distances: Option<SurfaceDistances>,
    ) -> Self {
        Self {
            min_dihedral: distortion.min_dihedral,
            mean_amips: distortion.mean_amips,
            max_amips: distortion.max_amips,
            flipped_count,
            hausdorff: distances.map(|d| d.hausdorff),
            chamfer: distances.map(|d| d.chamfer),
            tet_count: distortion.tet_count,
            vertex_count,
            psnr: None,
        }
    }
}

/// Dihedral and AMIPS statistics of arbitrary tetrahedra.
pub fn tet_distortion(tets: &[[Vec3; 4]]) -> Result<Distortion> {
    if tets.is_empty() {
        return Err(Error::NoSolid("no tetrahedra to measure".into()));
    }
    let per_tet: Vec<(f64, f64)> = tets
        .par_iter()
        .map(|t| {
            let min_angle = dihedral_angles(t).map_or(0.0, |a| a.iter().copied().fold(f64::INFINITY, f64::min));
            (min_angle, amips_energy(t).0)
        })
        .collect();
    let mut min_dihedral = f64::INFINITY;
    let mut sum = 0.0;
    let mut max_amips = f64::NEG_INFINITY;
    for &(angle, e) in &per_tet {
        min_dihedral = min_dihedral.min(angle);
        sum += e;
        max_amips = max_amips.max(e);
    }
    Ok(Distortion {
        min_dihedral,
        mean_amips: sum / tets.len() as f64,
        max_amips,
        tet_count: tets.len(),
    })
}

/// Distortion over the occupied tets of the deformed grid, plus the flip
/// count over all tets.
pub fn distortion_metrics(grid: &TetGrid, occ: &OccupancyField, threshold: f64) -> Result<(Distortion, usize)> {
    if occ.len() != grid.tet_count() {
        return Err(invalid(format!("{} occupancies for {} tets", occ.len(), grid.tet_count())));
    }
    let positions = grid.deformed_positions();
    let tets: Vec<[Vec3; 4]> = (0..grid.tet_count())
        .filter(|&t| occ.is_occupied(t, threshold))
        .map(|t| grid.tet_points(&positions, t))
        .collect();
    if tets.is_empty() {
        return Err(Error::NoSolid("occupancy marks no tetrahedron as inside".into()));
    }
    Ok((tet_distortion(&tets)?, count_flipped(grid)))
}

fn directed_distances(points: &[Vec3], to: &Bvh) -> Vec<f64> {
    points
        .par_iter()
        .map(|p| to.nearest(p).expect("non-empty mesh").1.sq_distance.sqrt())
        .collect()
}

/// Sampled two-sided distances between surfaces.
///
/// Each surface gets `samples` area-weighted points. Chamfer is the average
/// of the two mean point-to-surface distances; Hausdorff is the larger of the
/// two maxima.
pub fn surface_distances(pred: &SurfaceMesh, gt: &SurfaceMesh, samples: usize, seed: u64) -> Result<SurfaceDistances> {
    let from_gt = sample_surface(gt, samples, seed)?;
    let from_pred = sample_surface(pred, samples, seed)?;
    let d_gt = directed_distances(&from_gt.points, &Bvh::build(pred.triangle_soup()));
    let d_pred = directed_distances(&from_pred.points, &Bvh::build(gt.triangle_soup()));
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    let max = |d: &[f64]| d.iter().copied().fold(0.0, f64::max);
    Ok(SurfaceDistances {
        hausdorff: max(&d_gt).max(max(&d_pred)),
        chamfer: 0.5 * (mean(&d_gt) + mean(&d_pred)),
    })
}

/// `10 log10(1 / MSE)` over the RGB channels.
pub fn psnr(a: &Image, b: &Image) -> Result<Psnr> {
    if a.width != b.width || a.height != b.height {
        return Err(invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.pixel_count() == 0 {
        return Err(invalid("empty images"));
    }
    let sse: f64 = a
        .rgb
        .iter()
        .zip(&b.rgb)
        .map(|(x, y)| (0..3).map(|c| (x[c] - y[c]).powi(2)).sum::<f64>())
        .sum();
    let mse = sse / (3 * a.pixel_count()) as f64;
    Ok(if mse == 0.0 {
        Psnr::Exact
    } else {
        Psnr::Db(-10.0 * mse.log10())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{box_mesh, icosphere, unit_cube_mesh};
    use crate::lattice::build_lattice;

    fn regular_tet(scale: f64) -> [Vec3; 4] {
        let s = scale;
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(s, 0.0, 0.0),
            Vec3::new(0.5 * s, 3f64.sqrt() / 2.0 * s, 0.0),
            Vec3::new(0.5 * s, 3f64.sqrt() / 6.0 * s, (2.0f64 / 3.0).sqrt() * s),
        ]
    }

    /// Dihedral angle along edge (a, b) from the two face normals, used as an
    /// independent oracle.
    fn dihedral_oracle(p: [Vec3; 4], a: usize, b: usize) -> f64 {
        let others: Vec<usize> = (0..4).filter(|&i| i != a && i != b).collect();
        let e = p[b] - p[a];
        let n1 = e.cross(&(p[others[0]] - p[a]));
        let n2 = e.cross(&(p[others[1]] - p[a]));
        (n1.dot(&n2) / (n1.norm() * n2.norm())).acos().to_degrees()
    }

    #[test]
    fn kuhn_lattice_min_dihedral_matches_analytic_value() {
        // The Kuhn simplex 0 → e_x → e_x+e_y → e_x+e_y+e_z
        let kuhn = [
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(1.0, 1.0, 0.0),
            Vec3::new(1.0, 1.0, 1.0),
        ];
        let oracle = crate::geometry::TET_EDGES
            .iter()
            .map(|&(a, b)| dihedral_oracle(kuhn, a, b))
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - 45.0).abs() < 1e-9);
        for res in [1, 3] {
            let g = build_lattice(res).unwrap();
            let occ = OccupancyField::hard(vec![true; g.tet_count()]);
            let (d, flips) = distortion_metrics(&g, &occ, 0.5).unwrap();
            assert!((d.min_dihedral - oracle).abs() < 1e-9, "{}", d.min_dihedral);
            assert_eq!(flips, 0);
            assert_eq!(d.tet_count, 6 * res.pow(3));
        }
    }

    #[test]
    fn regular_tets_match_reference_values() {
        let tets: Vec<_> = (1..5).map(|k| regular_tet(0.3 * k as f64)).collect();
        let d = tet_distortion(&tets).unwrap();
        assert!((d.min_dihedral - (1.0f64 / 3.0).acos().to_degrees()).abs() < 1e-6);
        assert!((d.min_dihedral - 70.5288).abs() < 1e-4);
        assert!((d.mean_amips - 3.0).abs() < 1e-9);
        assert!((d.max_amips - 3.0).abs() < 1e-9);
    }

    #[test]
    fn perturbing_a_vertex_worsens_quality() {
        let mut g = build_lattice(2).unwrap();
        let occ = OccupancyField::hard(vec![true; g.tet_count()]);
        let (before, _) = distortion_metrics(&g, &occ, 0.5).unwrap();
        let centre = 13;
        g.offsets[centre] = Vec3::new(0.03, -0.05, 0.02);
        let (after, _) = distortion_metrics(&g, &occ, 0.5).unwrap();
        assert!(after.min_dihedral < before.min_dihedral || after.max_amips > before.max_amips);
    }

    #[test]
    fn empty_occupancy_has_no_solid() {
        let g = build_lattice(2).unwrap();
        let occ = OccupancyField::hard(vec![false; g.tet_count()]);
        assert!(matches!(distortion_metrics(&g, &occ, 0.5), Err(Error::NoSolid(_))));
    }

    #[test]
    fn mesh_against_itself_is_zero() {
        let m = icosphere(Vec3::new(0.5, 0.5, 0.5), 0.3, 2);
        let d = surface_distances(&m, &m, 2000, 3).unwrap();
        assert!(d.hausdorff < 1e-9 && d.chamfer < 1e-9);
    }

    /// Distance from `p` to the surface of the box `[lo, hi]³` for points outside it.
    fn box_distance(p: &Vec3, lo: f64, hi: f64) -> f64 {
        p.map(|x| (lo - x).max(x - hi).max(0.0)).norm()
    }

    #[test]
    fn inflated_cube_distances_match_analytic_offset() {
        let gt = unit_cube_mesh();
        let pred = box_mesh(Vec3::repeat(-0.01), Vec3::repeat(1.01));
        let n = 20_000;
        let seed = 11;
        let d = surface_distances(&pred, &gt, n, seed).unwrap();
        // points on the unit cube are exactly 0.01 from the inflated faces;
        // points on the inflated cube are at their exterior offset distance
        let on_pred = sample_surface(&pred, n, seed).unwrap();
        let outward: Vec<f64> = on_pred.points.iter().map(|p| box_distance(p, 0.0, 1.0)).collect();
        let oracle_chamfer = 0.5 * (0.01 + outward.iter().sum::<f64>() / n as f64);
        let oracle_hausdorff = outward.iter().copied().fold(0.01, f64::max);
        assert!((d.chamfer - oracle_chamfer).abs() <= 0.1 * oracle_chamfer);
        assert!((d.hausdorff - oracle_hausdorff).abs() <= 0.1 * oracle_hausdorff);
        assert!(d.chamfer <= 0.011, "{}", d.chamfer);
        assert!(d.hausdorff >= 0.01 && d.hausdorff <= 0.01 * 3f64.sqrt() + 1e-12);
    }

    #[test]
    fn distances_are_symmetric() {
        let a = icosphere(Vec3::new(0.5, 0.5, 0.5), 0.3, 2);
        let b = box_mesh(Vec3::repeat(0.2), Vec3::repeat(0.75));
        let ab = surface_distances(&a, &b, 3000, 5).unwrap();
        let ba = surface_distances(&b, &a, 3000, 5).unwrap();
        assert!((ab.chamfer - ba.chamfer).abs() < 1e-12);
        assert!((ab.hausdorff - ba.hausdorff).abs() < 1e-12);
    }

    #[test]
    fn rigid_motion_preserves_distances() {
        let a = icosphere(Vec3::new(0.5, 0.5, 0.5), 0.3, 2);
        let b = box_mesh(Vec3::repeat(0.2), Vec3::repeat(0.75));
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let t = Vec3::new(1.0, -2.0, 0.5);
        let moved = |m: &SurfaceMesh| m.transformed(|p| rot * p + t);
        let before = surface_distances(&a, &b, 3000, 9).unwrap();
        let after = surface_distances(&moved(&a), &moved(&b), 3000, 9).unwrap();
        assert!((before.chamfer - after.chamfer).abs() < 1e-9);
        assert!((before.hausdorff - after.hausdorff).abs() < 1e-9);
    }

    #[test]
    fn zero_area_mesh_is_rejected() {
        let flat = SurfaceMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 2]]).unwrap();
        let m = unit_cube_mesh();
        assert!(matches!(surface_distances(&flat, &m, 10, 0), Err(Error::DegenerateGeometry(_))));
    }

    fn image(w: usize, h: usize, f: impl Fn(usize) -> [f64; 3]) -> Image {
        let mut img = Image::new(w, h);
        img.rgb = (0..w * h).map(f).collect();
        img
    }

    #[test]
    fn psnr_closed_forms() {
        let a = image(4, 3, |i| [0.1 * (i % 5) as f64; 3]);
        let b = image(4, 3, |i| [0.1 * (i % 5) as f64 + 0.1; 3]);
        assert!((psnr(&a, &b).unwrap().db() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &a).unwrap(), Psnr::Exact);
        let perm = |img: &Image| {
            let mut out = img.clone();
            out.rgb.reverse();
            out
        };
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&perm(&a), &perm(&b)).unwrap());
        assert!(psnr(&a, &image(3, 4, |_| [0.0; 3])).is_err());
    }

    #[test]
    fn report_serializes_flat() {
        let r = QualityReport {
            psnr: Some(Psnr::Exact),
            ..QualityReport::new(
                Distortion {
                    min_dihedral: 45.0,
                    mean_amips: 3.2,
                    max_amips: 3.4,
                    tet_count: 6,
                },
                0,
                8,
                Some(SurfaceDistances {
                    hausdorff: 0.0,
                    chamfer: 0.0,
                }),
            )
        };
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        let obj = v.as_object().unwrap();
        for key in [
            "min_dihedral",
            "mean_amips",
            "max_amips",
            "flipped_count",
            "hausdorff",
            "chamfer",
            "tet_count",
            "vertex_count",
            "psnr",
        ] {
            assert!(obj.contains_key(key), "{key}");
            assert!(!obj[key].is_object());
        }
        assert_eq!(obj["psnr"], "exact");
    }
}
