use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::encoder::{ema_update, EncoderParams};
use super::features::{instance_feature, normalize, MemoryBank};
use super::loss::contrastive_loss;
use super::rig::{encoder_input, render_views, splat_views, CameraView, DepthSource, RigParams, ENCODER_INPUTS};
use super::sampling::{plan_samples, SamplePlan};
use super::LearnError;
use crate::bev::{cluster_footprint, occupancy_mask, BevParams, DepthBins, FeatureMap, GridSpec, OccupancyMask};
use crate::cluster::ClusteringResult;
use crate::geom::Frame;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PretrainParams {
    /// Foreground samples per frame (N_F).
    pub foreground_samples: usize,
    /// Background samples per frame (N_B).
    pub background_samples: usize,
    /// Softmax temperature τ.
    pub temperature: f64,
    /// EMA momentum of the target encoder.
    pub momentum: f64,
    /// Depth dropout fraction r of the online branch.
    pub dropout: f64,
    pub learning_rate: f64,
    /// Encoder output channels C.
    pub feature_dim: usize,
    /// Half width of the uniform initialization of the encoder parameters.
    pub init_scale: f64,
    /// Frames of history per memory bank (K).
    pub history: usize,
}

impl Default for PretrainParams {
    fn default() -> Self {
        Self {
            foreground_samples: 1000,
            background_samples: 1000,
            temperature: 0.1,
            momentum: 0.99,
            dropout: 0.3,
            learning_rate: 1e-2,
            feature_dim: 16,
            init_scale: 0.5,
            history: 16,
        }
    }
}

impl PretrainParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(LearnError::BadTemperature(self.temperature));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return Err(LearnError::BadMomentum(self.momentum));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(LearnError::BadConfig("dropout must lie in [0, 1]"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(LearnError::BadConfig("learning_rate must be non-negative"));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(LearnError::BadConfig("init_scale must be non-negative"));
        }
        if self.feature_dim == 0 || self.foreground_samples == 0 {
            return Err(LearnError::BadConfig("feature_dim and foreground_samples must be positive"));
        }
        Ok(())
    }
}

/// Everything a training step needs from one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInput {
    pub frame: usize,
    /// BEV footprint of each valid instance.
    pub footprints: Vec<Vec<(usize, usize)>>,
    /// Track id of each valid instance.
    pub tracks: Vec<usize>,
    pub occupancy: OccupancyMask,
    pub views: Vec<CameraView>,
}

/// Derives footprints, occupancy and camera views for one frame. Instances
/// whose footprint falls outside the grid are dropped.
pub fn prepare_frame<R: Rng + ?Sized>(
    frame: &Frame,
    clusters: &ClusteringResult,
    tracks: &[usize],
    bev: &BevParams,
    rig: &RigParams,
    rng: &mut R,
) -> Result<FrameInput, LearnError> {
    if tracks.len() != clusters.len() {
        return Err(LearnError::ShapeMismatch("one track id per cluster"));
    }
    let grid = bev.grid()?;
    let bins = bev.bins()?;
    let mut footprints = Vec::new();
    let mut ids = Vec::new();
    for (c, &t) in clusters.clusters.iter().zip(tracks) {
        let fp = cluster_footprint(&grid, frame, c);
        if !fp.is_empty() {
            footprints.push(fp);
            ids.push(t);
        }
    }
    let occupancy = occupancy_mask(&grid, frame, clusters, bev.occupancy_dilation);
    let views = render_views(frame, &rig.cameras(), &bins, rig, rng)?;
    Ok(FrameInput { frame: frame.index, footprints, tracks: ids, occupancy, views })
}

/// Inputs of the online objective that do not depend on the online parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineBatch {
    /// Encoder input built from the online (dropout) splat.
    pub input: FeatureMap,
    pub plan: SamplePlan,
    /// Unit temporal averages of the target instance features, by instance.
    pub instance_targets: Vec<Vec<f64>>,
    /// Unit target background features.
    pub background_targets: Vec<Vec<f64>>,
    pub temperature: f64,
}

/// Contrastive loss of the online encoder on `batch` and its gradient w.r.t.
/// the encoder parameters.
pub fn online_objective(params: &EncoderParams, batch: &OnlineBatch) -> Result<(f64, Vec<f64>), LearnError> {
    let grid = batch.input.grid;
    let c_in = batch.input.channels;
    let mut stencils = Vec::with_capacity(batch.plan.foreground.len());
    let mut online = Vec::with_capacity(batch.plan.foreground.len());
    let mut labels = Vec::with_capacity(batch.plan.foreground.len());
    // only the cells touched by stencils are evaluated
    let mut cache: alloc::collections::BTreeMap<usize, Vec<f64>> = alloc::collections::BTreeMap::new();
    for s in &batch.plan.foreground {
        let st = grid.stencil(s.x, s.y)?;
        let mut f = vec![0.0; params.outputs];
        for (&(r, c), &w) in st.cells.iter().zip(&st.weights) {
            let idx = r * grid.width + c;
            let out = cache.entry(idx).or_insert_with(|| params.forward_cell(&batch.input.data()[idx * c_in..(idx + 1) * c_in]));
            for (a, v) in f.iter_mut().zip(out.iter()) {
                *a += w * v;
            }
        }
        stencils.push(st);
        online.push(f);
        labels.push(s.instance);
    }
    let out = contrastive_loss(&online, &labels, &batch.instance_targets, &batch.background_targets, batch.temperature)?;
    let mut upstream: alloc::collections::BTreeMap<usize, Vec<f64>> = alloc::collections::BTreeMap::new();
    for (st, g) in stencils.iter().zip(&out.grad) {
        for (&(r, c), &w) in st.cells.iter().zip(&st.weights) {
            let d = upstream.entry(r * grid.width + c).or_insert_with(|| vec![0.0; params.outputs]);
            for (a, v) in d.iter_mut().zip(g) {
                *a += w * v;
            }
        }
    }
    let upstream: Vec<(usize, Vec<f64>)> = upstream.into_iter().collect();
    Ok((out.loss, params.backward(&batch.input, &upstream)))
}

/// Central finite differences of [`online_objective`] at the listed parameter
/// indices, compared with the analytic gradient by [`gradient_error`].
pub fn gradient_check(params: &EncoderParams, batch: &OnlineBatch, indices: &[usize], h: f64) -> Result<f64, LearnError> {
    let (_, analytic) = online_objective(params, batch)?;
    let mut p = params.clone();
    let mut pairs = Vec::with_capacity(indices.len());
    for &i in indices {
        let base = p.theta[i];
        p.theta[i] = base + h;
        let (up, _) = online_objective(&p, batch)?;
        p.theta[i] = base - h;
        let (down, _) = online_objective(&p, batch)?;
        p.theta[i] = base;
        pairs.push((analytic[i], (up - down) / (2.0 * h)));
    }
    Ok(gradient_error(&analytic, &pairs))
}

/// `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest deviation of the `(analytic, numeric)` pairs relative to the
/// gradient scale, the larger of `‖analytic‖∞` and the largest numeric value
/// (at least 1e-8).
pub fn gradient_error(analytic: &[f64], pairs: &[(f64, f64)]) -> f64 {
    let scale = analytic.iter().map(|a| a.abs()).chain(pairs.iter().map(|p| p.1.abs())).fold(1e-8, f64::max);
    pairs.iter().map(|(a, n)| (a - n).abs()).fold(0.0, f64::max) / scale
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PretrainState {
    pub online: EncoderParams,
    pub target: EncoderParams,
    pub bank: MemoryBank,
    pub steps: usize,
}

impl PretrainState {
    pub fn new<R: Rng + ?Sized>(params: &PretrainParams, rng: &mut R) -> Result<Self, LearnError> {
        params.validate()?;
        let online = EncoderParams::random(ENCODER_INPUTS, params.feature_dim, params.init_scale, rng);
        Ok(Self { target: online.clone(), online, bank: MemoryBank::new(params.history), steps: 0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepReport {
    pub frame: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub instances: usize,
}

/// Builds the online batch of a frame and pushes the target instance features
/// into the memory bank.
pub fn build_batch<R: Rng + ?Sized>(
    state: &mut PretrainState,
    input: &FrameInput,
    grid: &GridSpec,
    bins: &DepthBins,
    params: &PretrainParams,
    rng: &mut R,
) -> Result<OnlineBatch, LearnError> {
    let online_splat = splat_views(&input.views, bins, grid, DepthSource::Online { dropout: params.dropout }, rng)?;
    let target_splat = splat_views(&input.views, bins, grid, DepthSource::Target, rng)?;
    let target_map = state.target.forward(&encoder_input(&target_splat))?;
    let plan =
        plan_samples(grid, &input.footprints, &input.occupancy, params.foreground_samples, params.background_samples, rng)?;

    for (m, &track) in input.tracks.iter().enumerate() {
        let f = instance_feature(&target_map, &plan, m)?;
        state.bank.push(track, input.frame, f)?;
    }
    let instance_targets = input.tracks.iter().map(|&t| state.bank.temporal_average(t)).collect::<Result<Vec<_>, _>>()?;
    let background_targets =
        plan.background.iter().map(|&(x, y)| normalize(&target_map.sample_bilinear(x, y)?)).collect::<Result<Vec<_>, _>>()?;
    Ok(OnlineBatch {
        input: encoder_input(&online_splat),
        plan,
        instance_targets,
        background_targets,
        temperature: params.temperature,
    })
}

/// One optimization step: bank update, loss and gradient, SGD on the online
/// encoder, EMA on the target encoder.
pub fn pretrain_step<R: Rng + ?Sized>(
    state: &mut PretrainState,
    input: &FrameInput,
    bev: &BevParams,
    params: &PretrainParams,
    rng: &mut R,
) -> Result<StepReport, LearnError> {
    params.validate()?;
    if input.footprints.is_empty() {
        state.bank.evict_stale(input.frame);
        return Err(LearnError::SkippedFrame(input.frame));
    }
    let grid = bev.grid()?;
    let bins = bev.bins()?;
    let batch = build_batch(state, input, &grid, &bins, params, rng)?;
    apply_update(state, &batch, input, params)
}

/// Gradient step on the online encoder, EMA on the target, bank eviction.
pub fn apply_update(
    state: &mut PretrainState,
    batch: &OnlineBatch,
    input: &FrameInput,
    params: &PretrainParams,
) -> Result<StepReport, LearnError> {
    let (loss, grad) = online_objective(&state.online, batch)?;
    for (t, g) in state.online.theta.iter_mut().zip(&grad) {
        *t -= params.learning_rate * g;
    }
    state.target = ema_update(&state.target, &state.online, params.momentum)?;
    state.bank.evict_stale(input.frame);
    state.steps += 1;
    Ok(StepReport { frame: input.frame, loss, grad_norm: math::l2_norm(&grad), instances: input.tracks.len() })
}
