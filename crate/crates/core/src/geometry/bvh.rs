//! Bounding-volume hierarchy over a triangle soup.
//!
//! Answers two queries: every intersection along a ray, and the closest
//! triangle to a point. Both return exactly what a brute-force loop over all
//! triangles would, since the same per-triangle kernels are used and boxes
//! are padded so no candidate is culled by round-off.

use super::{point_triangle_distance, ray_triangle_intersect, ClosestPoint, RayHit};
use crate::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn of_triangle(tri: &[Vec3; 3]) -> Self {
        let mut b = Self::empty();
        for p in tri {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    fn padded(mut self) -> Self {
        let mag = self.min.abs().max().max(self.max.abs().max());
        let pad = 1e-9 * (1.0 + mag);
        self.min.add_scalar_mut(-pad);
        self.max.add_scalar_mut(pad);
        self
    }

    /// Whether the ray enters the box at some parameter `>= t_min`.
    fn hit_by(&self, origin: &Vec3, inv_dir: &Vec3, t_min: f64, t_max: f64) -> bool {
        let mut near = t_min;
        let mut far = t_max;
        for ax in 0..3 {
            if inv_dir[ax].is_infinite() {
                if origin[ax] < self.min[ax] || origin[ax] > self.max[ax] {
                    return false;
                }
                continue;
            }
            let mut t0 = (self.min[ax] - origin[ax]) * inv_dir[ax];
            let mut t1 = (self.max[ax] - origin[ax]) * inv_dir[ax];
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            near = near.max(t0);
            far = far.min(t1);
            if near > far {
                return false;
            }
        }
        true
    }

    fn sq_distance(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for ax in 0..3 {
            let excess = (self.min[ax] - p[ax]).max(p[ax] - self.max[ax]).max(0.0);
            d += excess * excess;
        }
        d
    }
}

#[derive(Clone, Debug)]
enum NodeKind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    kind: NodeKind,
}

/// Static BVH; owns a copy of its triangles.
#[derive(Clone, Debug)]
pub struct Bvh {
    triangles: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl Bvh {
    pub fn build(triangles: Vec<[Vec3; 3]>) -> Self {
        let boxes: Vec<Aabb> = triangles.iter().map(|t| Aabb::of_triangle(t).padded()).collect();
        let centers: Vec<Vec3> = triangles.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build_node(&mut nodes, &mut order, 0, triangles.len(), &boxes, &centers);
        }
        Self {
            triangles,
            order,
            nodes,
        }
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangles(&self) -> &[[Vec3; 3]] {
        &self.triangles
    }

    /// Calls `visit(triangle index, hit)` for every intersection along the ray.
    /// Visiting order is unspecified.
    pub fn for_each_hit(&self, origin: &Vec3, dir: &Vec3, mut visit: impl FnMut(usize, RayHit)) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if !node.bounds.hit_by(origin, &inv, 0.0, f64::INFINITY) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf { start, end } => {
                    for &tri in &self.order[start..end] {
                        if let Some(hit) = ray_triangle_intersect(origin, dir, &self.triangles[tri]) {
                            visit(tri, hit);
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
    }

    /// All hits sorted by ascending `t`, ties broken by triangle index.
    pub fn all_hits(&self, origin: &Vec3, dir: &Vec3) -> Vec<(usize, RayHit)> {
        let mut hits = Vec::new();
        self.for_each_hit(origin, dir, |i, h| hits.push((i, h)));
        sort_hits(&mut hits);
        hits
    }

    /// Closest triangle to `p`; equal distances resolve to the lower index.
    pub fn nearest(&self, p: &Vec3) -> Option<(usize, ClosestPoint)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, ClosestPoint)> = None;
        let mut stack = vec![(0usize, self.nodes[0].bounds.sq_distance(p))];
        while let Some((id, box_d)) = stack.pop() {
            if let Some((_, b)) = &best {
                if box_d > b.sq_distance {
                    continue;
                }
            }
            match self.nodes[id].kind {
                NodeKind::Leaf { start, end } => {
                    for &tri in &self.order[start..end] {
                        let cp = point_triangle_distance(p, &self.triangles[tri]);
                        let better = match &best {
                            None => true,
                            Some((bi, b)) => {
                                cp.sq_distance < b.sq_distance
                                    || (cp.sq_distance == b.sq_distance && tri < *bi)
                            }
                        };
                        if better {
                            best = Some((tri, cp));
                        }
                    }
                }
                NodeKind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.sq_distance(p);
                    let dr = self.nodes[right].bounds.sq_distance(p);
                    // nearer child popped first
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
        best
    }
}

pub(crate) fn sort_hits(hits: &mut [(usize, RayHit)]) {
    hits.sort_by(|a, b| a.1.t.total_cmp(&b.1.t).then(a.0.cmp(&b.0)));
}

fn build_node(
    nodes: &mut Vec<Node>,
    order: &mut [usize],
    start: usize,
    end: usize,
    boxes: &[Aabb],
    centers: &[Vec3],
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        bounds.merge(&boxes[i]);
        cbounds.grow(&centers[i]);
    }
    let id = nodes.len();
    nodes.push(Node {
        bounds,
        kind: NodeKind::Leaf { start, end },
    });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.imax();
    order[start..end].sort_by(|&a, &b| {
        centers[a][axis]
            .total_cmp(&centers[b][axis])
            .then(a.cmp(&b))
    });
    let mid = start + (end - start) / 2;
    let left = build_node(nodes, order, start, mid, boxes, centers);
    let right = build_node(nodes, order, mid, end, boxes, centers);
    nodes[id].kind = NodeKind::Inner { left, right };
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_soup(rng: &mut ChaCha8Rng, n: usize) -> Vec<[Vec3; 3]> {
        (0..n)
            .map(|_| {
                let base = Vec3::new(rng.gen(), rng.gen(), rng.gen());
                let mut jitter = || Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 0.2;
                [base, base + jitter(), base + jitter()]
            })
            .collect()
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let soup = random_soup(&mut rng, 300);
        let bvh = Bvh::build(soup.clone());
        for _ in 0..200 {
            let p = Vec3::new(rng.gen(), rng.gen(), rng.gen()) * 1.4 - Vec3::repeat(0.2);
            let (idx, cp) = bvh.nearest(&p).unwrap();
            let brute = soup
                .iter()
                .enumerate()
                .map(|(i, t)| (i, point_triangle_distance(&p, t).sq_distance))
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            assert_eq!(idx, brute.0);
            assert_eq!(cp.sq_distance, brute.1);
        }
    }

    #[test]
    fn ray_hits_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let soup = random_soup(&mut rng, 300);
        let bvh = Bvh::build(soup.clone());
        for _ in 0..200 {
            let o = Vec3::new(rng.gen(), rng.gen(), -1.0);
            let d = Vec3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, 1.0);
            let fast = bvh.all_hits(&o, &d);
            let mut slow: Vec<_> = soup
                .iter()
                .enumerate()
                .filter_map(|(i, t)| ray_triangle_intersect(&o, &d, t).map(|h| (i, h)))
                .collect();
            sort_hits(&mut slow);
            assert_eq!(fast, slow);
        }
    }

    #[test]
    fn axis_aligned_rays_on_box_planes() {
        // triangle in the plane z = 0.5, ray travelling inside that plane misses,
        // ray along z through it hits
        let tri = [Vec3::new(0., 0., 0.5), Vec3::new(1., 0., 0.5), Vec3::new(0., 1., 0.5)];
        let bvh = Bvh::build(vec![tri; 5]);
        assert_eq!(bvh.all_hits(&Vec3::new(0.2, 0.2, 0.0), &Vec3::z()).len(), 5);
        assert!(bvh.all_hits(&Vec3::new(-1.0, 0.2, 0.5), &Vec3::x()).is_empty());
    }
}
