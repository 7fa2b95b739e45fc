//! Pretraining over a tracked sequence.

use alloc::vec::Vec;

use super::train::{
    apply_update, build_batch, gradient_check, prepare_frame, FrameInput, PretrainParams, PretrainState, StepReport,
};
use super::{LearnError, MemoryBank, RigParams};
use crate::assoc::TrackSet;
use crate::bev::BevParams;
use crate::cluster::ClusteringResult;
use crate::geom::Frame;
use crate::rng::{stream, PRETRAIN_INIT, PRETRAIN_STEP, RIG_FRAME};

/// Finite-difference step used by the per-step gradient check.
pub const GRADCHECK_STEP: f64 = 1e-6;
/// Parameters checked per step; consecutive steps rotate through all of them.
pub const GRADCHECK_PARAMS: usize = 8;

/// Renders the camera views of one frame from its own stream and attaches
/// track ids to its clusters.
pub fn prepare_indexed(
    frame: &Frame,
    clusters: &ClusteringResult,
    tracks: &TrackSet,
    bev: &BevParams,
    rig: &RigParams,
    seed: u64,
) -> Result<FrameInput, LearnError> {
    let ids = (0..clusters.len())
        .map(|c| tracks.track_of(frame.index, c).ok_or(LearnError::ShapeMismatch("cluster without a track")))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = stream(seed, RIG_FRAME, frame.index as u64, 0);
    prepare_frame(frame, clusters, &ids, bev, rig, &mut rng)
}

/// [`prepare_indexed`] over a whole sequence.
pub fn prepare_sequence(
    frames: &[Frame],
    clusters: &[ClusteringResult],
    tracks: &TrackSet,
    bev: &BevParams,
    rig: &RigParams,
    seed: u64,
) -> Result<Vec<FrameInput>, LearnError> {
    if frames.len() != clusters.len() {
        return Err(LearnError::ShapeMismatch("one clustering per frame"));
    }
    frames.iter().zip(clusters).map(|(f, c)| prepare_indexed(f, c, tracks, bev, rig, seed)).collect()
}

/// Initial state drawn from the `seed` stream.
pub fn initial_state(params: &PretrainParams, seed: u64) -> Result<PretrainState, LearnError> {
    PretrainState::new(params, &mut stream(seed, PRETRAIN_INIT, 0, 0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub steps: usize,
    pub seed: u64,
    /// Check the analytic gradient by finite differences at every step.
    pub gradcheck: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub report: StepReport,
    /// Largest relative finite-difference error over the checked parameters.
    pub gradcheck: Option<f64>,
}

/// Runs `options.steps` optimization steps, cycling through `inputs` in order.
/// Frames without instances are skipped and do not count as steps. Each pass
/// over the sequence starts with empty memory banks, since frame indices
/// restart.
pub fn pretrain_sequence<F>(
    state: &mut PretrainState,
    inputs: &[FrameInput],
    bev: &BevParams,
    params: &PretrainParams,
    options: RunOptions,
    mut on_step: F,
) -> Result<Vec<StepRecord>, LearnError>
where
    F: FnMut(&StepRecord, &PretrainState),
{
    let RunOptions { steps, seed, gradcheck } = options;
    params.validate()?;
    let grid = bev.grid()?;
    let bins = bev.bins()?;
    let mut records = Vec::with_capacity(steps);
    if steps == 0 {
        return Ok(records);
    }
    if inputs.iter().all(|i| i.footprints.is_empty()) {
        return Err(LearnError::NoInstances);
    }
    let mut visit = 0usize;
    while records.len() < steps {
        let input = &inputs[visit % inputs.len()];
        if visit > 0 && visit % inputs.len() == 0 {
            state.bank = MemoryBank::new(params.history);
        }
        visit += 1;
        if input.footprints.is_empty() {
            state.bank.evict_stale(input.frame);
            continue;
        }
        let step = records.len();
        let mut rng = stream(seed, PRETRAIN_STEP, step as u64, 0);
        let batch = build_batch(state, input, &grid, &bins, params, &mut rng)?;
        let check = if gradcheck {
            let n = state.online.len();
            let indices: Vec<usize> = (0..GRADCHECK_PARAMS.min(n)).map(|j| (step * GRADCHECK_PARAMS + j) % n).collect();
            Some(gradient_check(&state.online, &batch, &indices, GRADCHECK_STEP)?)
        } else {
            None
        };
        let report = apply_update(state, &batch, input, params)?;
        let record = StepRecord { step, report, gradcheck: check };
        on_step(&record, state);
        records.push(record);
    }
    Ok(records)
}
