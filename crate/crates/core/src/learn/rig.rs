//! A surround camera rig synthesized from LiDAR frames: per-pixel features
//! from the nearest projected point, a measured depth bin, and a noisy
//! estimated depth distribution standing in for a depth network.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::LearnError;
use crate::bev::{
    dropout_mask_with, lift_splat_into, merge_depth, CameraModel, DepthBins, DepthDistribution, FeatureMap, GridSpec,
    ImageFeatures,
};
use crate::geom::Frame;
use crate::math;

/// Channels of a synthesized pixel: constant, intensity, height, hit flag.
pub const PIXEL_CHANNELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RigParams {
    pub cameras: usize,
    pub width: usize,
    pub rows: usize,
    pub focal: f64,
    /// Mounting height above the ego origin, meters.
    pub height: f64,
    /// Width of the estimated-depth bump, bins.
    pub depth_spread: f64,
    /// Largest offset of the bump from the measured bin, bins.
    pub depth_jitter: usize,
}

impl Default for RigParams {
    fn default() -> Self {
        Self { cameras: 4, width: 48, rows: 12, focal: 24.0, height: 1.6, depth_spread: 2.0, depth_jitter: 2 }
    }
}

impl RigParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.cameras == 0 || self.width == 0 || self.rows == 0 {
            return Err(LearnError::BadConfig("rig needs cameras and non-empty images"));
        }
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(LearnError::BadConfig("rig focal length must be positive"));
        }
        if !(self.depth_spread.is_finite() && self.depth_spread > 0.0) || !self.height.is_finite() {
            return Err(LearnError::BadConfig("rig depth spread must be positive"));
        }
        Ok(())
    }

    /// Evenly spaced horizontal cameras, the first looking along ego +x.
    pub fn cameras(&self) -> Vec<CameraModel> {
        (0..self.cameras)
            .map(|i| {
                let yaw = 2.0 * core::f64::consts::PI * i as f64 / self.cameras as f64;
                CameraModel::horizontal(yaw, self.height, self.focal, self.width, self.rows)
            })
            .collect()
    }
}

/// One camera's synthesized view.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub camera: CameraModel,
    pub image: ImageFeatures,
    /// Estimated depths; `gt` holds the measured bin where a point was hit.
    pub depths: Vec<DepthDistribution>,
}

fn bump(bins: usize, center: usize, spread: f64) -> Vec<f64> {
    let w: Vec<f64> = (1..=bins)
        .map(|k| {
            let d = (k as f64 - center as f64) / spread;
            math::exp(-0.5 * d * d)
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Projects every merged point of `frame` into each camera, keeps the nearest
/// per pixel and derives features and depths from it.
pub fn render_views<R: Rng + ?Sized>(
    frame: &Frame,
    cameras: &[CameraModel],
    bins: &DepthBins,
    params: &RigParams,
    rng: &mut R,
) -> Result<Vec<CameraView>, LearnError> {
    let mut views = Vec::with_capacity(cameras.len());
    for cam in cameras {
        let pixels = cam.width * cam.height;
        let mut nearest: Vec<Option<(f64, usize)>> = vec![None; pixels];
        for (i, tp) in frame.merged_points.iter().enumerate() {
            if let Some((row, col, depth)) = cam.project(tp.point.xyz()) {
                let slot = &mut nearest[row * cam.width + col];
                if slot.is_none_or(|(d, _)| depth < d) {
                    *slot = Some((depth, i));
                }
            }
        }
        let mut data = Vec::with_capacity(pixels * PIXEL_CHANNELS);
        let mut depths = Vec::with_capacity(pixels);
        for hit in &nearest {
            let gt = hit.and_then(|(d, _)| bins.bin_of(d));
            match (hit, gt) {
                (Some((_, i)), Some(k)) => {
                    let p = frame.merged_points[*i].point;
                    data.extend_from_slice(&[1.0, p.intensity, p.z, 1.0]);
                    let j = params.depth_jitter as i64;
                    let offset = if j > 0 { rng.random_range(-j..=j) } else { 0 };
                    let center = (k as i64 + offset).clamp(1, bins.count as i64) as usize;
                    depths.push(DepthDistribution::new(bump(bins.count, center, params.depth_spread))?.with_gt(Some(k)));
                }
                _ => {
                    data.extend_from_slice(&[1.0, 0.0, 0.0, 0.0]);
                    depths.push(DepthDistribution::uniform(bins.count));
                }
            }
        }
        let image = ImageFeatures::new(cam.height, cam.width, PIXEL_CHANNELS, data)?;
        views.push(CameraView { camera: *cam, image, depths });
    }
    Ok(views)
}

/// Which depth distributions feed a splat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthSource {
    /// Estimated depths, each bin dropped with probability `r`.
    Online { dropout: f64 },
    /// Estimated depths merged with the measured bin where one exists.
    Target,
}

/// Sums the lift-splat of every view into one map.
pub fn splat_views<R: Rng + ?Sized>(
    views: &[CameraView],
    bins: &DepthBins,
    grid: &GridSpec,
    source: DepthSource,
    rng: &mut R,
) -> Result<FeatureMap, LearnError> {
    let mut map = FeatureMap::zeros(*grid, PIXEL_CHANNELS);
    for view in views {
        let depths: Vec<DepthDistribution> = view
            .depths
            .iter()
            .map(|d| match source {
                DepthSource::Online { dropout } => dropout_mask_with(d, dropout, rng),
                DepthSource::Target => match d.gt {
                    Some(k) => merge_depth(d, k),
                    None => Ok(d.clone()),
                },
            })
            .collect::<Result<_, _>>()?;
        lift_splat_into(&view.image, &depths, &view.camera, bins, &mut map)?;
    }
    Ok(map)
}

/// Channels of the encoder input: signed log of the splat channels plus the
/// cell's normalized BEV coordinates.
pub const ENCODER_INPUTS: usize = PIXEL_CHANNELS + 2;

pub fn encoder_input(splat: &FeatureMap) -> FeatureMap {
    let g = splat.grid;
    let (sx, sy) = (0.5 * (g.x_max - g.x_min), 0.5 * (g.y_max - g.y_min));
    let (mx, my) = (0.5 * (g.x_max + g.x_min), 0.5 * (g.y_max + g.y_min));
    let mut data = Vec::with_capacity(g.cells() * (splat.channels + 2));
    for row in 0..g.height {
        for col in 0..g.width {
            for v in splat.cell(row, col) {
                data.push(math::ln_1p(v.abs()).copysign(*v));
            }
            let (x, y) = g.cell_center(row, col);
            data.push((x - mx) / sx);
            data.push((y - my) / sy);
        }
    }
    FeatureMap::from_data(g, splat.channels + 2, data).expect("finite inputs")
}
