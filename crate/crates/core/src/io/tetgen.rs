use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::with_extension;
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, TetGrid};
use crate::occupancy::OccupancyField;
use crate::Vec3;

/// Raw contents of a `.node`/`.ele` pair, with 0-based indices.
#[derive(Clone, Debug, PartialEq)]
pub struct TetgenMesh {
    pub points: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
}

/// Writes the deformed vertices to `stem.node` and the occupied tets to
/// `stem.ele`, both 1-indexed.
pub fn write_tetgen(grid: &TetGrid, occ: &OccupancyField, threshold: f64, stem: &Path) -> Result<()> {
    if occ.len() != grid.tet_count() {
        return Err(crate::error::invalid("occupancy does not match the grid"));
    }
    let positions = grid.deformed_positions();
    let mut node = format!("{} 3 0 0\n", positions.len());
    for (i, p) in positions.iter().enumerate() {
        let _ = writeln!(node, "{} {:.16e} {:.16e} {:.16e}", i + 1, p.x, p.y, p.z);
    }
    let occupied: Vec<&[usize; 4]> = (0..grid.tet_count())
        .filter(|&t| occ.is_occupied(t, threshold))
        .map(|t| &grid.tets[t])
        .collect();
    let mut ele = format!("{} 4 0\n", occupied.len());
    for (i, t) in occupied.iter().enumerate() {
        let _ = writeln!(ele, "{} {} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1, t[3] + 1);
    }
    fs::write(with_extension(stem, "node"), node)?;
    fs::write(with_extension(stem, "ele"), ele)?;
    Ok(())
}

/// Non-comment lines with their 1-based line numbers.
fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let tokens: Vec<&str> = l.split('#').next().unwrap_or("").split_whitespace().collect();
        (!tokens.is_empty()).then_some((i + 1, tokens))
    })
}

fn field<T: std::str::FromStr>(tokens: &[&str], k: usize, line: usize) -> Result<T> {
    tokens
        .get(k)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("expected a number in column {}", k + 1),
        })
}

pub fn read_tetgen(stem: &Path) -> Result<TetgenMesh> {
    let node = fs::read_to_string(with_extension(stem, "node"))?;
    let mut lines = records(&node);
    let (line, header) = lines.next().ok_or_else(|| Error::Format(".node file is empty".into()))?;
    let count: usize = field(&header, 0, line)?;
    let dim: usize = field(&header, 1, line)?;
    if dim != 3 {
        return Err(Error::Format(format!(".node dimension {dim}, expected 3")));
    }
    let mut points = Vec::with_capacity(count);
    for (line, tokens) in lines.take(count) {
        let idx: usize = field(&tokens, 0, line)?;
        if idx != points.len() + 1 {
            return Err(Error::Parse {
                line,
                message: format!("node {idx} out of sequence"),
            });
        }
        points.push(Vec3::new(field(&tokens, 1, line)?, field(&tokens, 2, line)?, field(&tokens, 3, line)?));
    }
    if points.len() != count {
        return Err(Error::Format(format!("{} nodes listed, header says {count}", points.len())));
    }

    let ele = fs::read_to_string(with_extension(stem, "ele"))?;
    let mut lines = records(&ele);
    let (line, header) = lines.next().ok_or_else(|| Error::Format(".ele file is empty".into()))?;
    let count: usize = field(&header, 0, line)?;
    let per: usize = field(&header, 1, line)?;
    if per != 4 {
        return Err(Error::Format(format!(".ele has {per} nodes per element, expected 4")));
    }
    let mut tets = Vec::with_capacity(count);
    for (line, tokens) in lines.take(count) {
        let mut t = [0usize; 4];
        for (k, slot) in t.iter_mut().enumerate() {
            let v: usize = field(&tokens, k + 1, line)?;
            if v == 0 || v > points.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("node index {v} out of range"),
                });
            }
            *slot = v - 1;
        }
        tets.push(t);
    }
    if tets.len() != count {
        return Err(Error::Format(format!("{} elements listed, header says {count}", tets.len())));
    }
    Ok(TetgenMesh { points, tets })
}

/// Rebuilds a deformed lattice and its hard occupancy from files written by
/// [`write_tetgen`]. The resolution follows from the node count `(n+1)³`.
pub fn grid_from_tetgen(stem: &Path) -> Result<(TetGrid, OccupancyField)> {
    let mesh = read_tetgen(stem)?;
    let side = (mesh.points.len() as f64).cbrt().round() as usize;
    if side < 2 || side.pow(3) != mesh.points.len() {
        return Err(Error::Format(format!("{} nodes do not form a lattice", mesh.points.len())));
    }
    let mut grid = build_lattice(side - 1)?;
    let offsets = mesh.points.iter().zip(&grid.rest_positions).map(|(p, r)| p - r).collect();
    grid.set_offsets(offsets)?;
    let index: HashMap<[usize; 4], usize> = grid.tets.iter().enumerate().map(|(i, t)| (*t, i)).collect();
    let mut labels = vec![false; grid.tet_count()];
    for t in &mesh.tets {
        let k = index
            .get(t)
            .ok_or_else(|| Error::Format(format!("element {t:?} is not a lattice tetrahedron")))?;
        labels[*k] = true;
    }
    Ok((grid, OccupancyField::hard(labels)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::signed_volume;

    #[test]
    fn round_trip_reproduces_positions_exactly() {
        let mut g = build_lattice(3).unwrap();
        for (i, o) in g.offsets.iter_mut().enumerate() {
            *o = Vec3::new(0.1 / (i as f64 + 3.0), -1e-7 * i as f64, std::f64::consts::PI * 1e-3);
        }
        let occ = OccupancyField::hard((0..g.tet_count()).map(|t| t % 3 != 0).collect());
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("mesh");
        write_tetgen(&g, &occ, 0.5, &stem).unwrap();
        let mesh = read_tetgen(&stem).unwrap();
        assert_eq!(mesh.points, g.deformed_positions());
        let (back, back_occ) = grid_from_tetgen(&stem).unwrap();
        assert_eq!(back.deformed_positions(), g.deformed_positions());
        assert_eq!(back_occ.values, occ.values);
        // rewriting is byte-identical
        let stem2 = dir.path().join("again");
        write_tetgen(&back, &back_occ, 0.5, &stem2).unwrap();
        for ext in ["node", "ele"] {
            assert_eq!(
                fs::read(with_extension(&stem, ext)).unwrap(),
                fs::read(with_extension(&stem2, ext)).unwrap()
            );
        }
    }

    #[test]
    fn empty_and_full_occupancy() {
        let g = build_lattice(1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("g");
        write_tetgen(&g, &OccupancyField::hard(vec![false; 6]), 0.5, &stem).unwrap();
        let ele = fs::read_to_string(with_extension(&stem, "ele")).unwrap();
        assert_eq!(ele.lines().next().unwrap(), "0 4 0");
        write_tetgen(&g, &OccupancyField::hard(vec![true; 6]), 0.5, &stem).unwrap();
        let mesh = read_tetgen(&stem).unwrap();
        assert_eq!(mesh.points.len(), 8);
        assert_eq!(mesh.tets.len(), 6);
        for t in &mesh.tets {
            let p = t.map(|v| mesh.points[v]);
            assert!(signed_volume(p[0], p[1], p[2], p[3]) > 0.0);
        }
        let node = fs::read_to_string(with_extension(&stem, "node")).unwrap();
        assert_eq!(node.lines().next().unwrap(), "8 3 0 0");
    }

    #[test]
    fn unwritable_and_malformed() {
        let g = build_lattice(1).unwrap();
        let occ = OccupancyField::hard(vec![true; 6]);
        assert!(matches!(
            write_tetgen(&g, &occ, 0.5, Path::new("/nonexistent/dir/g")),
            Err(Error::Io(_))
        ));
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("bad");
        fs::write(with_extension(&stem, "node"), "2 3 0 0\n1 0 0 0\n2 0 x 0\n").unwrap();
        fs::write(with_extension(&stem, "ele"), "0 4 0\n").unwrap();
        assert!(matches!(read_tetgen(&stem), Err(Error::Parse { line: 3, .. })));
    }
}
