//! Frames in, tracks out: ground removal, clustering and association chained
//! over a sequence.

use alloc::vec::Vec;

use crate::assoc::{AssocError, AssocParams, FrameObservation, TrackBuilder, TrackSet};
use crate::cluster::{identify_instances, ClusterError, ClusterParams, ClusteringResult};
use crate::geom::Frame;
use crate::ground::{segment_ground, GroundError, GroundLabeling, GroundParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("frame {frame}: {source}")]
    Ground { frame: usize, source: GroundError },
    #[error("frame {frame}: {source}")]
    Cluster { frame: usize, source: ClusterError },
    #[error(transparent)]
    Assoc(#[from] AssocError),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrackingParams {
    pub ground: GroundParams,
    pub cluster: ClusterParams,
    pub assoc: AssocParams,
}

/// Per-frame products of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInstances {
    pub ground: GroundLabeling,
    pub clusters: ClusteringResult,
}

/// Ground segmentation and instance identification of one frame.
pub fn frame_instances(frame: &Frame, params: &TrackingParams) -> Result<FrameInstances, PipelineError> {
    let ground = segment_ground(frame, &params.ground).map_err(|source| PipelineError::Ground { frame: frame.index, source })?;
    let clusters = identify_instances(frame, &ground, &params.cluster)
        .map_err(|source| PipelineError::Cluster { frame: frame.index, source })?;
    Ok(FrameInstances { ground, clusters })
}

/// Links precomputed per-frame instances into tracks.
pub fn link_instances(frames: &[Frame], instances: &[FrameInstances], params: &AssocParams) -> Result<TrackSet, PipelineError> {
    let mut builder = TrackBuilder::new(*params)?;
    for (frame, inst) in frames.iter().zip(instances) {
        builder.push(FrameObservation::from_clustering(frame.index, frame.frame_pose, &inst.clusters))?;
    }
    Ok(builder.finish())
}

/// Runs the whole correspondence pipeline sequentially.
pub fn track_frames(frames: &[Frame], params: &TrackingParams) -> Result<(TrackSet, Vec<FrameInstances>), PipelineError> {
    let instances = frames.iter().map(|f| frame_instances(f, params)).collect::<Result<Vec<_>, _>>()?;
    let tracks = link_instances(frames, &instances, &params.assoc)?;
    Ok((tracks, instances))
}
