//! Instance identification: HDBSCAN on non-ground points, then the end-scan
//! validity filter and first/last-scan centroids.

pub mod hdbscan;
pub mod knn;

use alloc::vec::Vec;

pub use hdbscan::{hdbscan, HdbscanParams};

use crate::geom::Frame;
use crate::ground::GroundLabeling;
use crate::math::{self, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClusterError {
    #[error("ground labeling has {labels} entries for {points} points")]
    Misaligned { labels: usize, points: usize },
    #[error("invalid cluster parameter: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ClusterParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Minimum points a cluster needs in both the first and the last sweep.
    pub min_scan_points: usize,
    /// Points farther than this planar range are not clustered.
    pub max_range: f64,
    pub allow_single_cluster: bool,
    pub knn_cell: f64,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 10,
            min_samples: 10,
            min_scan_points: 5,
            max_range: 60.0,
            allow_single_cluster: true,
            knn_cell: 0.5,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.min_cluster_size < 2 {
            return Err(ClusterError::BadParams("min_cluster_size must be at least 2"));
        }
        if self.min_samples == 0 {
            return Err(ClusterError::BadParams("min_samples must be positive"));
        }
        if self.min_scan_points == 0 {
            return Err(ClusterError::BadParams("min_scan_points must be positive"));
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return Err(ClusterError::BadParams("max_range must be positive"));
        }
        if !(self.knn_cell.is_finite() && self.knn_cell > 0.0) {
            return Err(ClusterError::BadParams("knn_cell must be positive"));
        }
        Ok(())
    }

    pub fn hdbscan(&self) -> HdbscanParams {
        HdbscanParams {
            min_cluster_size: self.min_cluster_size,
            min_samples: self.min_samples,
            allow_single_cluster: self.allow_single_cluster,
            knn_cell: self.knn_cell,
        }
    }
}

/// One valid instance of a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub id: usize,
    /// Indices into `Frame::merged_points`, ascending.
    pub points: Vec<usize>,
    pub first_scan: Vec<usize>,
    pub last_scan: Vec<usize>,
    pub first_center: Vec3,
    pub last_center: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusteringResult {
    pub clusters: Vec<Cluster>,
    /// Non-ground in-range points that belong to no valid cluster, ascending.
    pub noise: Vec<usize>,
    /// Clusters dropped by the end-scan filter.
    pub discarded: usize,
}

impl ClusteringResult {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

fn centroid(frame: &Frame, idx: &[usize]) -> Vec3 {
    let mut acc = [0.0; 3];
    for &i in idx {
        acc = math::add(acc, frame.merged_points[i].point.xyz());
    }
    math::scale(acc, 1.0 / idx.len() as f64)
}

/// Clusters the non-ground, in-range points of `frame` and keeps clusters with
/// at least `min_scan_points` points in both the first and the last sweep.
pub fn identify_instances(
    frame: &Frame,
    ground: &GroundLabeling,
    params: &ClusterParams,
) -> Result<ClusteringResult, ClusterError> {
    params.validate()?;
    if ground.is_ground.len() != frame.merged_points.len() {
        return Err(ClusterError::Misaligned { labels: ground.is_ground.len(), points: frame.merged_points.len() });
    }
    let candidates: Vec<usize> = frame
        .merged_points
        .iter()
        .enumerate()
        .filter(|(i, tp)| !ground.is_ground[*i] && math::hypot(tp.point.x, tp.point.y) <= params.max_range)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Ok(ClusteringResult::default());
    }
    let coords: Vec<Vec3> = candidates.iter().map(|&i| frame.merged_points[i].point.xyz()).collect();
    let labels = hdbscan::hdbscan(&coords, &params.hdbscan());
    let n_groups = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = (0..n_groups).map(|_| Vec::new()).collect();
    let mut noise = Vec::new();
    for (local, label) in labels.iter().enumerate() {
        match label {
            Some(g) => groups[*g].push(candidates[local]),
            None => noise.push(candidates[local]),
        }
    }

    let first_tag = frame.first_sweep();
    let last_tag = frame.last_sweep();
    let mut clusters = Vec::new();
    let mut discarded = 0;
    for points in groups {
        let tagged =
            |tag: u32| -> Vec<usize> { points.iter().copied().filter(|&i| frame.merged_points[i].sweep == tag).collect() };
        let first_scan = tagged(first_tag);
        let last_scan = tagged(last_tag);
        if first_scan.len() < params.min_scan_points || last_scan.len() < params.min_scan_points {
            discarded += 1;
            noise.extend_from_slice(&points);
            continue;
        }
        let first_center = centroid(frame, &first_scan);
        let last_center = centroid(frame, &last_scan);
        clusters.push(Cluster { id: clusters.len(), points, first_scan, last_scan, first_center, last_center });
    }
    noise.sort_unstable();
    Ok(ClusteringResult { clusters, noise, discarded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{compose_frame, Point3, Pose, Sweep};
    use crate::ground::GroundParams;
    use alloc::vec;

    fn blob(center: Vec3, n: usize, spacing: f64) -> Vec<Point3> {
        (0..n)
            .map(|i| {
                let (a, b, c) = ((i % 4) as f64, ((i / 4) % 4) as f64, (i / 16) as f64);
                Point3::new(center[0] + a * spacing, center[1] + b * spacing, center[2] + c * spacing)
            })
            .collect()
    }

    fn no_ground(frame: &Frame) -> GroundLabeling {
        GroundLabeling { is_ground: vec![false; frame.len()], params: GroundParams::default(), lines: Vec::new() }
    }

    #[test]
    fn middle_sweep_only_cluster_is_discarded() {
        let sweeps = vec![
            Sweep { timestamp: 0.0, points: blob([20.0, 0.0, 1.0], 3, 0.1), pose: Pose::identity() },
            Sweep { timestamp: 0.1, points: blob([5.0, 5.0, 1.0], 32, 0.1), pose: Pose::identity() },
            Sweep { timestamp: 0.2, points: blob([-20.0, 0.0, 1.0], 3, 0.1), pose: Pose::identity() },
        ];
        let frame = compose_frame(0, sweeps).unwrap();
        let params = ClusterParams { min_cluster_size: 5, min_samples: 3, ..Default::default() };
        let res = identify_instances(&frame, &no_ground(&frame), &params).unwrap();
        assert!(res.clusters.is_empty());
        assert_eq!(res.discarded, 1);
        assert_eq!(res.noise.len(), frame.len());
    }

    #[test]
    fn single_end_point_suffices_with_threshold_one() {
        let mut s0 = blob([5.0, 5.0, 1.0], 12, 0.1);
        s0.truncate(1);
        let mut s2 = blob([5.0, 5.0, 1.0], 12, 0.1);
        s2.truncate(1);
        let sweeps = vec![
            Sweep { timestamp: 0.0, points: s0, pose: Pose::identity() },
            Sweep { timestamp: 0.1, points: blob([5.0, 5.0, 1.0], 20, 0.1), pose: Pose::identity() },
            Sweep { timestamp: 0.2, points: s2, pose: Pose::identity() },
        ];
        let frame = compose_frame(0, sweeps).unwrap();
        let params = ClusterParams { min_cluster_size: 5, min_samples: 3, min_scan_points: 1, ..Default::default() };
        let res = identify_instances(&frame, &no_ground(&frame), &params).unwrap();
        assert_eq!(res.clusters.len(), 1);
        let c = &res.clusters[0];
        assert_eq!(c.first_scan, vec![0]);
        assert_eq!(c.last_scan, vec![21]);
        assert_eq!(c.first_center, [5.0, 5.0, 1.0]);
    }

    #[test]
    fn all_ground_gives_empty_result() {
        let sweeps = vec![
            Sweep { timestamp: 0.0, points: blob([1.0, 1.0, 0.0], 20, 0.1), pose: Pose::identity() },
            Sweep { timestamp: 0.1, points: blob([1.0, 1.0, 0.0], 20, 0.1), pose: Pose::identity() },
        ];
        let frame = compose_frame(0, sweeps).unwrap();
        let ground = GroundLabeling { is_ground: vec![true; frame.len()], params: GroundParams::default(), lines: Vec::new() };
        let res = identify_instances(&frame, &ground, &ClusterParams::default()).unwrap();
        assert_eq!(res, ClusteringResult::default());
    }

    #[test]
    fn misaligned_labels_error() {
        let sweeps = vec![
            Sweep { timestamp: 0.0, points: blob([1.0, 1.0, 0.0], 2, 0.1), pose: Pose::identity() },
            Sweep { timestamp: 0.1, points: blob([1.0, 1.0, 0.0], 2, 0.1), pose: Pose::identity() },
        ];
        let frame = compose_frame(0, sweeps).unwrap();
        let ground = GroundLabeling { is_ground: vec![false; 3], params: GroundParams::default(), lines: Vec::new() };
        assert!(matches!(identify_instances(&frame, &ground, &ClusterParams::default()), Err(ClusterError::Misaligned { .. })));
    }
}
