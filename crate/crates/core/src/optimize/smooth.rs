use crate::error::{invalid, Result};
use crate::lattice::TetGrid;
use crate::Vec3;

/// Jacobi Laplace smoothing of the offsets:
/// `Δv_i ← Δv_i + λ (mean_{j∈N(i)} Δv_j − Δv_i)`, repeated.
pub fn laplacian_smooth(grid: &TetGrid, iterations: usize, factor: f64) -> Result<TetGrid> {
    if !(0.0..1.0).contains(&factor) {
        return Err(invalid(format!("smoothing factor must lie in [0, 1), got {factor}")));
    }
    let mut out = grid.clone();
    for _ in 0..iterations {
        let next: Vec<Vec3> = out
            .vertex_neighbors
            .iter()
            .zip(&out.offsets)
            .map(|(nbrs, o)| {
                if nbrs.is_empty() {
                    return *o;
                }
                let mean = nbrs.iter().fold(Vec3::zeros(), |acc, &j| acc + out.offsets[j]) / nbrs.len() as f64;
                o + (mean - o) * factor
            })
            .collect();
        out.offsets = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;

    #[test]
    fn uniform_offsets_are_a_fixed_point() {
        let mut g = build_lattice(2).unwrap();
        g.offsets = vec![Vec3::new(0.01, 0.02, -0.03); g.vertex_count()];
        let s = laplacian_smooth(&g, 5, 0.5).unwrap();
        for (a, b) in s.offsets.iter().zip(&g.offsets) {
            assert!((a - b).norm() < 1e-16);
        }
    }

    #[test]
    fn spike_shrinks_monotonically() {
        let mut g = build_lattice(3).unwrap();
        let v = 21;
        g.offsets[v] = Vec3::new(0.1, 0.05, 0.0);
        let mut prev = g.offsets[v].norm();
        let mut cur = g.clone();
        for _ in 0..10 {
            cur = laplacian_smooth(&cur, 1, 0.4).unwrap();
            let n = cur.offsets[v].norm();
            assert!(n < prev);
            prev = n;
        }
    }

    #[test]
    fn zero_factor_is_identity_and_bad_factor_rejected() {
        let mut g = build_lattice(2).unwrap();
        g.offsets[5] = Vec3::new(0.2, 0.0, 0.0);
        assert_eq!(laplacian_smooth(&g, 3, 0.0).unwrap().offsets, g.offsets);
        assert!(laplacian_smooth(&g, 1, 1.0).is_err());
        assert!(laplacian_smooth(&g, 1, -0.1).is_err());
    }
}
