use alloc::vec::Vec;

use super::{BevError, DepthBins, DepthDistribution, FeatureMap, GridSpec};
use crate::geom::Pose;
use crate::math::{self, Vec3};

/// Pinhole camera. Camera axes: x right, y down, z forward; depth is the
/// z coordinate. Pixel `(row, col)` is sampled at its center
/// `(u, v) = (col + ½, row + ½)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Camera frame to ego frame.
    pub extrinsic: Pose,
}

impl CameraModel {
    pub fn validate(&self) -> Result<(), BevError> {
        if !(self.fx.is_finite() && self.fy.is_finite() && self.fx > 0.0 && self.fy > 0.0) {
            return Err(BevError::BadCamera("focal lengths must be positive"));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(BevError::BadCamera("principal point must be finite"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(BevError::BadCamera("empty image"));
        }
        self.extrinsic.validate().map_err(|_| BevError::BadCamera("extrinsic is not a rigid pose"))
    }

    /// Horizontal camera at `height` above the ego origin looking along `yaw`
    /// (radians from ego +x, counter-clockwise), principal point centered.
    pub fn horizontal(yaw: f64, height: f64, focal: f64, width: usize, rows: usize) -> Self {
        // columns: camera x, y, z axes expressed in a yaw-0 ego frame
        let base = [[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]];
        let yaw_pose = Pose::from_yaw(yaw, [0.0; 3]);
        let rotation = crate::math::mat_mul(yaw_pose.rotation(), &base);
        let extrinsic = Pose::new(rotation, [0.0, 0.0, height]).expect("axis permutation is a rotation");
        Self { fx: focal, fy: focal, cx: width as f64 / 2.0, cy: rows as f64 / 2.0, width, height: rows, extrinsic }
    }

    /// Ego-frame point on the ray of pixel `(row, col)` at `depth`.
    #[inline]
    pub fn unproject(&self, row: usize, col: usize, depth: f64) -> Vec3 {
        let u = col as f64 + 0.5;
        let v = row as f64 + 0.5;
        let cam = [(u - self.cx) / self.fx * depth, (v - self.cy) / self.fy * depth, depth];
        self.extrinsic.apply(cam)
    }

    /// Pixel `(row, col)` and depth of an ego-frame point, if it is in front of
    /// the camera and inside the image.
    pub fn project(&self, p: Vec3) -> Option<(usize, usize, f64)> {
        let c = self.extrinsic.apply_inverse(p);
        if c[2] <= 1e-6 {
            return None;
        }
        let u = self.fx * c[0] / c[2] + self.cx;
        let v = self.fy * c[1] / c[2] + self.cy;
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let (col, row) = (math::floor(u) as usize, math::floor(v) as usize);
        (col < self.width && row < self.height).then_some((row, col, c[2]))
    }
}

/// Row-major image of `channels`-dimensional pixel features.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFeatures {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageFeatures {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self, BevError> {
        if data.len() != height * width * channels {
            return Err(BevError::Shape("image data length does not match dimensions"));
        }
        Ok(Self { height, width, channels, data })
    }

    #[inline]
    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let at = (row * self.width + col) * self.channels;
        &self.data[at..at + self.channels]
    }
}

/// Lifts every pixel feature along its camera ray, weighted by the pixel's
/// depth distribution, and sums the weighted features into the BEV cell under
/// each lifted point. Mass landing outside the grid is dropped.
pub fn lift_splat(
    image: &ImageFeatures,
    depths: &[DepthDistribution],
    cam: &CameraModel,
    bins: &DepthBins,
    grid: &GridSpec,
) -> Result<FeatureMap, BevError> {
    let mut out = FeatureMap::zeros(*grid, image.channels);
    lift_splat_into(image, depths, cam, bins, &mut out)?;
    Ok(out)
}

/// Accumulating form of [`lift_splat`], used to sum several cameras into one map.
pub fn lift_splat_into(
    image: &ImageFeatures,
    depths: &[DepthDistribution],
    cam: &CameraModel,
    bins: &DepthBins,
    out: &mut FeatureMap,
) -> Result<(), BevError> {
    cam.validate()?;
    if image.height != cam.height || image.width != cam.width {
        return Err(BevError::Shape("image size differs from camera size"));
    }
    if depths.len() != image.height * image.width {
        return Err(BevError::Shape("need one depth distribution per pixel"));
    }
    if depths.iter().any(|d| d.len() != bins.count) {
        return Err(BevError::Shape("depth distribution length differs from bin count"));
    }
    if out.channels != image.channels {
        return Err(BevError::Shape("feature map channels differ from image channels"));
    }
    let grid = out.grid;
    for row in 0..image.height {
        for col in 0..image.width {
            let feat = image.pixel(row, col);
            let dist = &depths[row * image.width + col];
            for (k, &p) in dist.probs().iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                let pt = cam.unproject(row, col, bins.depth(k + 1));
                if let Some((r, c)) = grid.cell_of(pt[0], pt[1]) {
                    for (o, f) in out.cell_mut(r, c).iter_mut().zip(feat) {
                        *o += p * f;
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn forward_cam() -> CameraModel {
        CameraModel::horizontal(0.0, 1.5, 10.0, 1, 1)
    }

    #[test]
    fn horizontal_camera_looks_along_yaw() {
        let cam = forward_cam();
        // center pixel ray goes straight ahead at sensor height
        let p = cam.unproject(0, 0, 5.0);
        assert!((p[0] - 5.0).abs() < 1e-12 && p[1].abs() < 1e-12 && (p[2] - 1.5).abs() < 1e-12);
        let left = CameraModel::horizontal(core::f64::consts::FRAC_PI_2, 1.5, 10.0, 1, 1);
        let q = left.unproject(0, 0, 5.0);
        assert!(q[0].abs() < 1e-12 && (q[1] - 5.0).abs() < 1e-12);
        assert_eq!(cam.project([5.0, 0.0, 1.5]), Some((0, 0, 5.0)));
        assert_eq!(cam.project([-5.0, 0.0, 1.5]), None);
    }

    #[test]
    fn one_hot_lands_in_one_cell() {
        let cam = forward_cam();
        let bins = DepthBins::new(1.0, 1.0, 10).unwrap();
        let grid = GridSpec::new(-8.0, 8.0, -8.0, 8.0, 1.0).unwrap();
        let image = ImageFeatures::new(1, 1, 2, vec![3.0, -1.0]).unwrap();
        // bin 4 -> depth 5 -> ego (5, 0) -> cell col 13, row 8
        let depth = DepthDistribution::one_hot(10, 4).unwrap();
        let map = lift_splat(&image, &[depth], &cam, &bins, &grid).unwrap();
        assert_eq!(map.cell(8, 13), &[3.0, -1.0]);
        assert_eq!(map.l1_mass(), 4.0);
    }

    #[test]
    fn uniform_two_bins_split_mass() {
        let cam = forward_cam();
        let bins = DepthBins::new(1.0, 1.0, 2).unwrap();
        let grid = GridSpec::new(-8.0, 8.0, -8.0, 8.0, 1.0).unwrap();
        let image = ImageFeatures::new(1, 1, 1, vec![2.0]).unwrap();
        let map = lift_splat(&image, &[DepthDistribution::uniform(2)], &cam, &bins, &grid).unwrap();
        // depths 2 and 3 -> columns 10 and 11
        assert_eq!(map.cell(8, 10), &[1.0]);
        assert_eq!(map.cell(8, 11), &[1.0]);
    }

    #[test]
    fn out_of_extent_mass_is_dropped() {
        let cam = forward_cam();
        let bins = DepthBins::new(1.0, 1.0, 20).unwrap();
        let grid = GridSpec::new(-8.0, 8.0, -8.0, 8.0, 1.0).unwrap();
        let image = ImageFeatures::new(1, 1, 1, vec![1.0]).unwrap();
        let map = lift_splat(&image, &[DepthDistribution::uniform(20)], &cam, &bins, &grid).unwrap();
        // depths 2..=7 stay inside x < 8
        assert!((map.l1_mass() - 6.0 / 20.0).abs() < 1e-12);
    }

    #[test]
    fn shape_checks() {
        let cam = forward_cam();
        let bins = DepthBins::new(1.0, 1.0, 2).unwrap();
        let grid = GridSpec::new(-8.0, 8.0, -8.0, 8.0, 1.0).unwrap();
        let image = ImageFeatures::new(1, 1, 1, vec![2.0]).unwrap();
        assert!(lift_splat(&image, &[], &cam, &bins, &grid).is_err());
        assert!(lift_splat(&image, &[DepthDistribution::uniform(3)], &cam, &bins, &grid).is_err());
    }
}
