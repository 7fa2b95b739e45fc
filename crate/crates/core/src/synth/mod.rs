//! Deterministic synthetic LiDAR scenes with ground-truth identities.
//!
//! Objects are boxes moving at constant velocity. Each sweep draws fresh
//! surface samples in point-symmetric pairs with fixed per-face counts, so the
//! noise-free mean of an object's points follows the box exactly. Ground points
//! lie on z = 0.

mod scene;
mod score;

use alloc::string::String;

pub use scene::{
    face_pairs, generate, generate_frame, object_centroid, sample_surface, BoxObject, EgoSpec, FrameTruth, GroundTruth,
    ObjectCenters, SceneSpec,
};
pub use score::{entry_identities, score_tracks, ScoreParams, TrackMetrics};

use crate::geom::GeomError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Geom(#[from] GeomError),
}
