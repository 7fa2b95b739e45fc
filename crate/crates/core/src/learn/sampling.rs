use alloc::vec::Vec;

use rand::Rng;

use super::LearnError;
use crate::bev::{GridSpec, OccupancyMask};
use crate::math;

/// A BEV sample tagged with the instance it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForegroundSample {
    pub instance: usize,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplePlan {
    /// Grouped by instance, instances ascending.
    pub foreground: Vec<ForegroundSample>,
    pub background: Vec<(f64, f64)>,
}

impl SamplePlan {
    /// Number of foreground samples of instance `m`.
    pub fn count(&self, m: usize) -> usize {
        self.foreground.iter().filter(|s| s.instance == m).count()
    }

    pub fn instance_samples(&self, m: usize) -> impl Iterator<Item = &ForegroundSample> {
        self.foreground.iter().filter(move |s| s.instance == m)
    }
}

/// Splits `total` samples over instances proportionally to `weights`, with at
/// least one each; remainders go to the largest fractional parts, then to the
/// lowest index.
pub fn allocate(weights: &[usize], total: usize) -> Result<Vec<usize>, LearnError> {
    let m = weights.len();
    if m > total {
        return Err(LearnError::TooFewSamples { instances: m, samples: total });
    }
    if let Some(i) = weights.iter().position(|w| *w == 0) {
        return Err(LearnError::EmptyFootprint(i));
    }
    let spare = total - m;
    let sum: usize = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| *w as f64 / sum as f64 * spare as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| math::floor(*q) as usize).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - counts[a] as f64, quotas[b] - counts[b] as f64);
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut left = spare - counts.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    Ok(counts.into_iter().map(|c| c + 1).collect())
}

fn point_in_cell<R: Rng + ?Sized>(grid: &GridSpec, cell: (usize, usize), rng: &mut R) -> (f64, f64) {
    let (x0, x1, y0, y1) = grid.sampleable_cell_bounds(cell.0, cell.1);
    (x0 + (x1 - x0) * rng.random::<f64>(), y0 + (y1 - y0) * rng.random::<f64>())
}

/// Draws `n_f` foreground samples over the instance footprints and `n_b`
/// background samples over free occupancy cells. Cells are chosen uniformly,
/// positions uniformly inside the sampleable part of the cell.
pub fn plan_samples<R: Rng + ?Sized>(
    grid: &GridSpec,
    footprints: &[Vec<(usize, usize)>],
    occupancy: &OccupancyMask,
    n_f: usize,
    n_b: usize,
    rng: &mut R,
) -> Result<SamplePlan, LearnError> {
    let weights: Vec<usize> = footprints.iter().map(Vec::len).collect();
    let counts = allocate(&weights, n_f)?;
    let mut plan = SamplePlan { foreground: Vec::with_capacity(n_f), background: Vec::with_capacity(n_b) };
    for (m, (cells, &count)) in footprints.iter().zip(&counts).enumerate() {
        for _ in 0..count {
            let cell = cells[rng.random_range(0..cells.len())];
            let (x, y) = point_in_cell(grid, cell, rng);
            plan.foreground.push(ForegroundSample { instance: m, x, y });
        }
    }
    if n_b > 0 {
        let free = occupancy.free_cells();
        if free.is_empty() {
            return Err(LearnError::NoBackground);
        }
        for _ in 0..n_b {
            let cell = free[rng.random_range(0..free.len())];
            plan.background.push(point_in_cell(grid, cell, rng));
        }
    }
    Ok(plan)
}
