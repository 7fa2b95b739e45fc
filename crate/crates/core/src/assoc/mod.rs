//! Inter-frame data association: ego-motion compensation of instance centers,
//! gated Hungarian matching and long-term track assembly.

pub mod hungarian;
pub mod tracks;

use alloc::vec;
use alloc::vec::Vec;

pub use hungarian::{hungarian, Assignment, CostMatrix};
pub use tracks::{assemble_tracks, Track, TrackBuilder, TrackEntry, TrackSet};

use crate::cluster::ClusteringResult;
use crate::geom::{self, Pose};
use crate::math::{self, Vec3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssocError {
    #[error("cost matrix is not square: {rows} rows, {len} entries")]
    NotSquare { rows: usize, len: usize },
    #[error("cost entries must be finite and non-negative, got {0}")]
    BadCost(f64),
    #[error("match threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error("frames out of order: {prev} then {curr}")]
    FrameOrder { prev: usize, curr: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AssocParams {
    /// Largest center distance of a valid match (τ_d), meters.
    pub match_threshold: f64,
    /// Historical frames kept per track (K); windows hold K + 1 frames.
    pub history: usize,
}

impl Default for AssocParams {
    fn default() -> Self {
        Self { match_threshold: 0.5, history: 16 }
    }
}

impl AssocParams {
    pub fn validate(&self) -> Result<(), AssocError> {
        if !(self.match_threshold.is_finite() && self.match_threshold > 0.0) {
            return Err(AssocError::BadThreshold(self.match_threshold));
        }
        Ok(())
    }

    /// Cost assigned to padding and to over-threshold pairs.
    pub fn pad_cost(&self) -> f64 {
        2.0 * self.match_threshold
    }
}

/// Instance centers of one frame, in that frame's ego coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub frame: usize,
    pub pose: Pose,
    pub first_centers: Vec<Vec3>,
    pub last_centers: Vec<Vec3>,
}

impl FrameObservation {
    pub fn from_clustering(frame: usize, pose: Pose, clusters: &ClusteringResult) -> Self {
        Self {
            frame,
            pose,
            first_centers: clusters.clusters.iter().map(|c| c.first_center).collect(),
            last_centers: clusters.clusters.iter().map(|c| c.last_center).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.first_centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_centers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub prev: usize,
    pub curr: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatching {
    pub matches: Vec<Match>,
    /// Current-frame instances with no predecessor.
    pub births: Vec<usize>,
    /// Previous-frame instances with no successor.
    pub deaths: Vec<usize>,
}

/// Distances between transferred previous last-scan centers (rows) and current
/// first-scan centers (columns), row-major `prev.len() × curr.len()`.
pub fn center_distances(prev: &FrameObservation, curr: &FrameObservation) -> Vec<f64> {
    let motion = Pose::relative(&prev.pose, &curr.pose);
    let transferred: Vec<Vec3> = prev.last_centers.iter().map(|c| geom::transfer_center_relative(*c, &motion)).collect();
    let mut out = Vec::with_capacity(prev.len() * curr.len());
    for t in &transferred {
        out.extend(curr.first_centers.iter().map(|c| math::dist3(*t, *c)));
    }
    out
}

/// Square cost matrix for the Hungarian step. Over-threshold real pairs cost the
/// same as padding, so leaving an instance unmatched is never worse than forcing
/// it onto a pair the gate would reject.
pub fn gated_cost_matrix(
    n_prev: usize,
    n_curr: usize,
    distances: &[f64],
    params: &AssocParams,
) -> Result<CostMatrix, AssocError> {
    let n = n_prev.max(n_curr);
    let pad = params.pad_cost();
    let mut data = vec![pad; n * n];
    for r in 0..n_prev {
        for c in 0..n_curr {
            let d = distances[r * n_curr + c];
            if d <= params.match_threshold {
                data[r * n + c] = d;
            }
        }
    }
    CostMatrix::new(n, data)
}

/// Matches the instances of two neighbouring frames.
pub fn match_frames(prev: &FrameObservation, curr: &FrameObservation, params: &AssocParams) -> Result<FrameMatching, AssocError> {
    params.validate()?;
    let (np, nc) = (prev.len(), curr.len());
    let distances = center_distances(prev, curr);
    let cost = gated_cost_matrix(np, nc, &distances, params)?;
    let assignment = hungarian(&cost);

    let mut matched_curr = vec![false; nc];
    let mut out = FrameMatching::default();
    for (r, &c) in assignment.row_to_col.iter().enumerate() {
        if r < np && c < nc {
            let d = distances[r * nc + c];
            if d <= params.match_threshold {
                out.matches.push(Match { prev: r, curr: c, distance: d });
                matched_curr[c] = true;
                continue;
            }
        }
        if r < np {
            out.deaths.push(r);
        }
    }
    out.births = (0..nc).filter(|c| !matched_curr[*c]).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(frame: usize, pose: Pose, centers: &[Vec3]) -> FrameObservation {
        FrameObservation { frame, pose, first_centers: centers.to_vec(), last_centers: centers.to_vec() }
    }

    #[test]
    fn single_pair_under_threshold() {
        let m = match_frames(
            &obs(0, Pose::identity(), &[[0.0; 3]]),
            &obs(1, Pose::identity(), &[[0.3, 0.0, 0.0]]),
            &AssocParams::default(),
        )
        .unwrap();
        assert_eq!(m.matches.len(), 1);
        assert!(m.births.is_empty() && m.deaths.is_empty());
    }

    #[test]
    fn over_threshold_is_birth_and_death() {
        let m = match_frames(
            &obs(0, Pose::identity(), &[[0.0; 3]]),
            &obs(1, Pose::identity(), &[[1.0, 0.0, 0.0]]),
            &AssocParams::default(),
        )
        .unwrap();
        assert!(m.matches.is_empty());
        assert_eq!(m.deaths, vec![0]);
        assert_eq!(m.births, vec![0]);
    }

    #[test]
    fn empty_frames() {
        let p = AssocParams::default();
        let m = match_frames(&obs(0, Pose::identity(), &[]), &obs(1, Pose::identity(), &[[0.0; 3]]), &p).unwrap();
        assert_eq!(m.births, vec![0]);
        let m = match_frames(&obs(0, Pose::identity(), &[[0.0; 3]]), &obs(1, Pose::identity(), &[]), &p).unwrap();
        assert_eq!(m.deaths, vec![0]);
    }

    #[test]
    fn saturation_keeps_nearest_valid_pair() {
        // Raw distances would favour A-Y + B-X (0.2 + 1.0) over A-X + B-Y
        // (0.1 + 1.3); with over-threshold pairs saturated the closer A-X wins.
        let prev = obs(0, Pose::identity(), &[[0.0; 3], [1.1, 0.0, 0.0]]);
        let curr = obs(1, Pose::identity(), &[[0.1, 0.0, 0.0], [-0.2, 0.0, 0.0]]);
        let m = match_frames(&prev, &curr, &AssocParams::default()).unwrap();
        assert_eq!(m.matches.len(), 1);
        assert_eq!((m.matches[0].prev, m.matches[0].curr), (0, 0));
        assert_eq!(m.deaths, vec![1]);
        assert_eq!(m.births, vec![1]);
    }

    #[test]
    fn ego_motion_is_compensated() {
        // static world point at x = 10; ego moves +1 m along x between frames
        let prev = obs(0, Pose::translation_only([0.0, 0.0, 0.0]), &[[10.0, 0.0, 0.0]]);
        let curr = obs(1, Pose::translation_only([1.0, 0.0, 0.0]), &[[9.0, 0.0, 0.0]]);
        let m = match_frames(&prev, &curr, &AssocParams::default()).unwrap();
        assert_eq!(m.matches.len(), 1);
        assert!(m.matches[0].distance < 1e-12);
    }
}
