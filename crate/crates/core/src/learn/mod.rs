//! Contrastive pretraining core: BEV sampling plans, instance features, the
//! per-track memory bank, the toy online/target encoders and the
//! point-to-instance loss with its analytic gradient.

mod encoder;
mod features;
mod loss;
mod rig;
mod run;
mod sampling;
mod train;

pub use encoder::{ema_update, EncoderParams};
pub use features::{check_unit, instance_feature, normalize, BankEntries, MemoryBank, DEGENERATE_NORM, UNIT_TOL};
pub use loss::{contrastive_loss, LossOutput};
pub use rig::{encoder_input, render_views, splat_views, CameraView, DepthSource, RigParams, ENCODER_INPUTS, PIXEL_CHANNELS};
pub use run::{
    initial_state, prepare_indexed, prepare_sequence, pretrain_sequence, RunOptions, StepRecord, GRADCHECK_PARAMS, GRADCHECK_STEP,
};
pub use sampling::{allocate, plan_samples, ForegroundSample, SamplePlan};
pub use train::{
    apply_update, build_batch, gradient_check, gradient_error, online_objective, prepare_frame, pretrain_step, relative_error,
    FrameInput, OnlineBatch, PretrainParams, PretrainState, StepReport,
};

use crate::bev::BevError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("instance {0} has no samples")]
    NoSamples(usize),
    #[error("no stored features for track {0}")]
    NoHistory(usize),
    #[error("cannot normalize a zero-length feature")]
    NormalizationDegenerate,
    #[error("feature is not unit length (norm {0})")]
    NotNormalized(f64),
    #[error("temperature must be positive, got {0}")]
    BadTemperature(f64),
    #[error("momentum {0} outside [0, 1]")]
    BadMomentum(f64),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(&'static str),
    #[error("{samples} foreground samples cannot cover {instances} instances")]
    TooFewSamples { instances: usize, samples: usize },
    #[error("instance {0} has an empty footprint")]
    EmptyFootprint(usize),
    #[error("no free cell for background samples")]
    NoBackground,
    #[error("track {track}: frame {frame} is not after {last}")]
    FrameOrder { track: usize, last: usize, frame: usize },
    #[error("frame {0} has no valid instances")]
    SkippedFrame(usize),
    #[error("no frame of the sequence has a valid instance")]
    NoInstances,
    #[error("invalid pretraining parameter: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Bev(#[from] BevError),
}

#[cfg(test)]
mod tests;
