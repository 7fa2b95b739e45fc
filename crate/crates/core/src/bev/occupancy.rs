use alloc::vec;
use alloc::vec::Vec;

use super::GridSpec;
use crate::cluster::{Cluster, ClusteringResult};
use crate::geom::Frame;

/// Cells covered by valid clusters, dilated.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMask {
    pub grid: GridSpec,
    cells: Vec<bool>,
}

impl OccupancyMask {
    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.grid.width + col]
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Unoccupied cells in row-major order.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        (0..self.grid.height).flat_map(|r| (0..self.grid.width).map(move |c| (r, c))).filter(|&(r, c)| !self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }
}

/// Distinct cells holding at least one point of `cluster`, row-major order.
pub fn cluster_footprint(grid: &GridSpec, frame: &Frame, cluster: &Cluster) -> Vec<(usize, usize)> {
    let mut cells: Vec<(usize, usize)> = cluster
        .points
        .iter()
        .filter_map(|&i| {
            let p = frame.merged_points[i].point;
            grid.cell_of(p.x, p.y)
        })
        .collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}

/// Marks every cell with a point of a valid cluster, then grows the marks by
/// `dilation` cells in the 8-neighbourhood sense.
pub fn occupancy_mask(grid: &GridSpec, frame: &Frame, clusters: &ClusteringResult, dilation: usize) -> OccupancyMask {
    let (w, h) = (grid.width, grid.height);
    let mut seed = vec![false; w * h];
    for c in &clusters.clusters {
        for (r, col) in cluster_footprint(grid, frame, c) {
            seed[r * w + col] = true;
        }
    }
    if dilation == 0 {
        return OccupancyMask { grid: *grid, cells: seed };
    }
    let d = dilation as isize;
    let mut cells = vec![false; w * h];
    for r in 0..h {
        for c in 0..w {
            if !seed[r * w + c] {
                continue;
            }
            for dr in -d..=d {
                for dc in -d..=d {
                    let (rr, cc) = (r as isize + dr, c as isize + dc);
                    if rr >= 0 && cc >= 0 && (rr as usize) < h && (cc as usize) < w {
                        cells[rr as usize * w + cc as usize] = true;
                    }
                }
            }
        }
    }
    OccupancyMask { grid: *grid, cells }
}
