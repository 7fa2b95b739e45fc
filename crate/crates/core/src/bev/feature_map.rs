use alloc::vec;
use alloc::vec::Vec;

use super::BevError;
use crate::math;

/// Metric extent and resolution of a BEV grid. Row `i` runs along y, column `j`
/// along x; cell `(i, j)` is centered at
/// `(x_min + (j + ½)·cell, y_min + (i + ½)·cell)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell: f64,
    pub width: usize,
    pub height: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64, cell: f64) -> Result<Self, BevError> {
        if ![x_min, x_max, y_min, y_max, cell].iter().all(|v| v.is_finite()) {
            return Err(BevError::BadGrid("non-finite extent"));
        }
        if cell <= 0.0 || x_max <= x_min || y_max <= y_min {
            return Err(BevError::BadGrid("empty extent or non-positive cell"));
        }
        let w = (x_max - x_min) / cell;
        let h = (y_max - y_min) / cell;
        let (wr, hr) = (math::round(w), math::round(h));
        if (w - wr).abs() > 1e-6 || (h - hr).abs() > 1e-6 {
            return Err(BevError::BadGrid("extent is not a whole number of cells"));
        }
        Ok(Self { x_min, x_max, y_min, y_max, cell, width: wr as usize, height: hr as usize })
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (self.x_min + (col as f64 + 0.5) * self.cell, self.y_min + (row as f64 + 0.5) * self.cell)
    }

    /// Cell containing `(x, y)`, `None` outside the extent.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let u = (x - self.x_min) / self.cell;
        let v = (y - self.y_min) / self.cell;
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let (col, row) = (math::floor(u) as usize, math::floor(v) as usize);
        (col < self.width && row < self.height).then_some((row, col))
    }

    /// Whether bilinear sampling is defined at `(x, y)`: between the first and
    /// last cell centers on both axes, up to rounding of the centers themselves.
    pub fn sampleable(&self, x: f64, y: f64) -> bool {
        let u = (x - self.x_min) / self.cell - 0.5;
        let v = (y - self.y_min) / self.cell - 0.5;
        u >= -CENTER_SLACK
            && v >= -CENTER_SLACK
            && u <= (self.width - 1) as f64 + CENTER_SLACK
            && v <= (self.height - 1) as f64 + CENTER_SLACK
    }

    /// Sampleable sub-rectangle of a cell: `(x_lo, x_hi, y_lo, y_hi)`.
    pub fn sampleable_cell_bounds(&self, row: usize, col: usize) -> (f64, f64, f64, f64) {
        let half = 0.5 * self.cell;
        let (x_lo_ok, x_hi_ok) = (self.x_min + half, self.x_max - half);
        let (y_lo_ok, y_hi_ok) = (self.y_min + half, self.y_max - half);
        let x0 = self.x_min + col as f64 * self.cell;
        let y0 = self.y_min + row as f64 * self.cell;
        (x0.max(x_lo_ok), (x0 + self.cell).min(x_hi_ok), y0.max(y_lo_ok), (y0 + self.cell).min(y_hi_ok))
    }

    /// The four cells and weights bilinear sampling uses at `(x, y)`.
    pub fn stencil(&self, x: f64, y: f64) -> Result<BilinearStencil, BevError> {
        if !self.sampleable(x, y) {
            return Err(BevError::OutOfBounds { x, y });
        }
        let u = (x - self.x_min) / self.cell - 0.5;
        let v = (y - self.y_min) / self.cell - 0.5;
        let (j0, fx) = split_axis(u, self.width);
        let (i0, fy) = split_axis(v, self.height);
        let j1 = (j0 + 1).min(self.width - 1);
        let i1 = (i0 + 1).min(self.height - 1);
        Ok(BilinearStencil {
            cells: [(i0, j0), (i0, j1), (i1, j0), (i1, j1)],
            weights: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
        })
    }
}

/// Grid-unit slack that keeps rounded cell centers sampleable.
const CENTER_SLACK: f64 = 1e-9;

fn split_axis(t: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let mut t = t.clamp(0.0, (n - 1) as f64);
    // centers computed in metric units land a few ulps off the integer grid
    let nearest = math::round(t);
    if (t - nearest).abs() <= CENTER_SLACK {
        t = nearest;
    }
    let base = (math::floor(t) as usize).min(n - 2);
    (base, t - base as f64)
}

/// Cells `(row, col)` in the order `[00, 01, 10, 11]` (x varies fastest) and
/// their bilinear weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BilinearStencil {
    pub cells: [(usize, usize); 4],
    pub weights: [f64; 4],
}

/// A BEV grid of `channels`-dimensional feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub grid: GridSpec,
    pub channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(grid: GridSpec, channels: usize) -> Self {
        Self { grid, channels, data: vec![0.0; grid.cells() * channels] }
    }

    pub fn from_data(grid: GridSpec, channels: usize, data: Vec<f64>) -> Result<Self, BevError> {
        if data.len() != grid.cells() * channels {
            return Err(BevError::Shape("feature data length does not match grid"));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BevError::Shape("feature data must be finite"));
        }
        Ok(Self { grid, channels, data })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let at = (row * self.grid.width + col) * self.channels;
        &self.data[at..at + self.channels]
    }

    #[inline]
    pub fn cell_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let at = (row * self.grid.width + col) * self.channels;
        &mut self.data[at..at + self.channels]
    }

    /// Bilinear interpolation of the four cell centers around `(x, y)`.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Result<Vec<f64>, BevError> {
        let st = self.grid.stencil(x, y)?;
        let mut out = vec![0.0; self.channels];
        self.accumulate(&st, 1.0, &mut out);
        Ok(out)
    }

    /// `out += scale · Σ w_k f(cell_k)`.
    pub fn accumulate(&self, st: &BilinearStencil, scale: f64, out: &mut [f64]) {
        for (&(r, c), &w) in st.cells.iter().zip(&st.weights) {
            let f = self.cell(r, c);
            for (o, v) in out.iter_mut().zip(f) {
                *o += scale * w * v;
            }
        }
    }

    /// Sum of absolute values of all entries.
    pub fn l1_mass(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }
}
