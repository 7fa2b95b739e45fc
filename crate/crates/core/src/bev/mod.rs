//! Bird's-eye-view grids: bilinear sampling, depth distributions, lift-splat
//! projection and cluster occupancy.

mod depth;
mod feature_map;
mod occupancy;
mod splat;

pub use depth::{dropout_mask, dropout_mask_with, merge_depth, DepthBins, DepthDistribution};
pub use feature_map::{BilinearStencil, FeatureMap, GridSpec};
pub use occupancy::{cluster_footprint, occupancy_mask, OccupancyMask};
pub use splat::{lift_splat, lift_splat_into, CameraModel, ImageFeatures};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BevError {
    #[error("point ({x}, {y}) is outside the sampleable extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("depth index {index} outside 1..={bins}")]
    BadIndex { index: usize, bins: usize },
    #[error("depth distribution is not normalized (sum {0})")]
    NotNormalized(f64),
    #[error("fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("invalid grid: {0}")]
    BadGrid(&'static str),
    #[error("invalid camera: {0}")]
    BadCamera(&'static str),
    #[error("shape mismatch: {0}")]
    Shape(&'static str),
}

/// Default BEV and depth settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BevParams {
    /// Half width of the square BEV extent, meters.
    pub half_extent: f64,
    pub cell: f64,
    pub depth_bins: usize,
    pub depth_start: f64,
    pub depth_step: f64,
    /// Background-occupancy dilation, cells.
    pub occupancy_dilation: usize,
}

impl Default for BevParams {
    fn default() -> Self {
        Self { half_extent: 51.2, cell: 0.8, depth_bins: 60, depth_start: 1.0, depth_step: 1.0, occupancy_dilation: 1 }
    }
}

impl BevParams {
    pub fn grid(&self) -> Result<GridSpec, BevError> {
        GridSpec::new(-self.half_extent, self.half_extent, -self.half_extent, self.half_extent, self.cell)
    }

    pub fn bins(&self) -> Result<DepthBins, BevError> {
        DepthBins::new(self.depth_start, self.depth_step, self.depth_bins)
    }

    pub fn validate(&self) -> Result<(), BevError> {
        self.grid()?;
        self.bins()?;
        Ok(())
    }
}
