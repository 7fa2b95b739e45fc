//! Exact k-nearest-neighbour distances for core-distance computation.
//!
//! Points are bucketed in a uniform grid over the BEV (x, y) plane. A query
//! scans square rings of cells around its own cell and stops once the k-th best
//! 3D distance is no larger than the planar gap to the next ring, which makes
//! the result exact.

use alloc::vec;
use alloc::vec::Vec;

use crate::math::{self, Vec3};

/// Below this many points the grid is skipped in favour of brute force.
pub const BRUTE_FORCE_BELOW: usize = 512;

/// Distance from every point to its `k`-th nearest neighbour, counting the
/// point itself as the first neighbour. `k` is clamped to the point count.
pub fn kth_neighbor_distances(points: &[Vec3], k: usize, cell: f64) -> Vec<f64> {
    if points.is_empty() || k == 0 {
        return vec![0.0; points.len()];
    }
    let k = k.min(points.len());
    if points.len() < BRUTE_FORCE_BELOW {
        brute_force(points, k)
    } else {
        GridIndex::new(points, cell).kth_distances(points, k)
    }
}

pub fn brute_force(points: &[Vec3], k: usize) -> Vec<f64> {
    let mut buf = Vec::with_capacity(points.len());
    points
        .iter()
        .map(|p| {
            buf.clear();
            buf.extend(points.iter().map(|q| math::dist3(*p, *q)));
            buf.sort_unstable_by(f64::total_cmp);
            buf[k - 1]
        })
        .collect()
}

struct GridIndex {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    /// CSR layout: points of cell c are `order[start[c]..start[c + 1]]`.
    start: Vec<usize>,
    order: Vec<usize>,
}

impl GridIndex {
    fn new(points: &[Vec3], cell: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let mut cell = if cell.is_finite() && cell > 0.0 { cell } else { 1.0 };
        // keep the grid at most ~4 cells per point
        let limit = 4 * points.len();
        loop {
            let nx = ((hi[0] - lo[0]) / cell) as usize + 1;
            let ny = ((hi[1] - lo[1]) / cell) as usize + 1;
            if nx.saturating_mul(ny) <= limit {
                break;
            }
            cell *= 2.0;
        }
        let nx = ((hi[0] - lo[0]) / cell) as usize + 1;
        let ny = ((hi[1] - lo[1]) / cell) as usize + 1;
        let cell_of = |p: &Vec3| {
            let ix = (((p[0] - lo[0]) / cell) as usize).min(nx - 1);
            let iy = (((p[1] - lo[1]) / cell) as usize).min(ny - 1);
            iy * nx + ix
        };
        let mut start = vec![0usize; nx * ny + 1];
        for p in points {
            start[cell_of(p) + 1] += 1;
        }
        for c in 0..nx * ny {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            order[fill[c]] = i;
            fill[c] += 1;
        }
        Self { origin: lo, cell, nx, ny, start, order }
    }

    fn kth_distances(&self, points: &[Vec3], k: usize) -> Vec<f64> {
        let mut best: Vec<f64> = Vec::with_capacity(k + 1);
        let max_ring = self.nx.max(self.ny);
        points
            .iter()
            .map(|p| {
                best.clear();
                let cx = (((p[0] - self.origin[0]) / self.cell) as usize).min(self.nx - 1) as isize;
                let cy = (((p[1] - self.origin[1]) / self.cell) as usize).min(self.ny - 1) as isize;
                for ring in 0..=max_ring as isize {
                    self.visit_ring(cx, cy, ring, |i| {
                        let d = math::dist3(*p, points[i]);
                        if best.len() < k {
                            let pos = best.partition_point(|b| *b <= d);
                            best.insert(pos, d);
                        } else if d < best[k - 1] {
                            let pos = best.partition_point(|b| *b <= d);
                            best.insert(pos, d);
                            best.truncate(k);
                        }
                    });
                    if best.len() == k && best[k - 1] <= self.ring_clearance(p, cx, cy, ring) {
                        break;
                    }
                }
                best[k - 1]
            })
            .collect()
    }

    /// Planar distance from `p` to the outside of the square of rings `0..=ring`,
    /// a lower bound on the distance to any point not yet visited.
    fn ring_clearance(&self, p: &Vec3, cx: isize, cy: isize, ring: isize) -> f64 {
        let (lx, ly) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        let c = self.cell;
        let left = lx - (cx - ring) as f64 * c;
        let right = (cx + ring + 1) as f64 * c - lx;
        let down = ly - (cy - ring) as f64 * c;
        let up = (cy + ring + 1) as f64 * c - ly;
        left.min(right).min(down).min(up).max(0.0)
    }

    fn visit_ring(&self, cx: isize, cy: isize, ring: isize, mut f: impl FnMut(usize)) {
        let (nx, ny) = (self.nx as isize, self.ny as isize);
        let mut visit_cell = |x: isize, y: isize| {
            if x < 0 || y < 0 || x >= nx || y >= ny {
                return;
            }
            let c = (y * nx + x) as usize;
            for &i in &self.order[self.start[c]..self.start[c + 1]] {
                f(i);
            }
        };
        if ring == 0 {
            visit_cell(cx, cy);
            return;
        }
        for x in cx - ring..=cx + ring {
            visit_cell(x, cy - ring);
            visit_cell(x, cy + ring);
        }
        for y in cy - ring + 1..cy + ring {
            visit_cell(cx - ring, y);
            visit_cell(cx + ring, y);
        }
    }
}
