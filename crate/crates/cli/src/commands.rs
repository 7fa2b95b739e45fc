//! The five commands. Each writes its outputs into an output directory and
//! returns a summary; all randomness derives from the scene or `--seed`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use cohere_core::assoc::TrackSet;
use cohere_core::bev::BevParams;
use cohere_core::geom::Frame;
use cohere_core::learn::{
    contrastive_loss, encoder_input, gradient_error, initial_state, normalize, prepare_indexed, pretrain_sequence,
    relative_error, splat_views, DepthSource, FrameInput, RunOptions, GRADCHECK_STEP,
};
use cohere_core::pipeline::{frame_instances, link_instances, FrameInstances, TrackingParams};
use cohere_core::rng::{stream, GRADCHECK};
use cohere_core::synth::{generate_frame, score_tracks, GroundTruth, SceneSpec, TrackMetrics};
use log::{debug, info, warn};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::formats::{
    encode_feature_map, read_frames, read_tracks, read_truth, to_json_lines, to_json_pretty, track_records, write_file,
    write_frames, TRUTH_FILE,
};
use crate::plots;

/// Largest relative error accepted by gradient checks.
pub const GRADCHECK_TOLERANCE: f64 = 1e-5;

/// Runs `f` on a pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| Error::Threads(e.to_string()))?;
    Ok(pool.install(f))
}

/// Frames and ground truth of `spec`, generated in parallel.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Vec<Frame>, GroundTruth)> {
    spec.validate()?;
    for w in spec.warnings() {
        warn!("{w}");
    }
    let parts = (0..spec.frames).into_par_iter().map(|f| generate_frame(spec, f)).collect::<Result<Vec<_>, _>>()?;
    let (frames, truth): (Vec<_>, Vec<_>) = parts.into_iter().unzip();
    Ok((frames, GroundTruth { objects: spec.objects.len(), frames: truth }))
}

/// Instances of every frame in parallel, then sequential linking.
pub fn run_tracking(frames: &[Frame], params: &TrackingParams) -> Result<(TrackSet, Vec<FrameInstances>)> {
    let instances = frames.par_iter().map(|f| frame_instances(f, params)).collect::<Result<Vec<_>, _>>()?;
    let tracks = link_instances(frames, &instances, &params.assoc)?;
    Ok((tracks, instances))
}

pub fn length_histogram(tracks: &TrackSet) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for t in &tracks.tracks {
        *h.entry(t.len()).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSummary {
    pub seed: u64,
    pub frames: usize,
    pub sweeps_per_frame: usize,
    pub points_per_frame: Vec<usize>,
    pub objects: usize,
}

/// Writes the frames of `spec` (sweep files and poses) and `truth.json` into `out`.
pub fn synth_gen(spec: &SceneSpec, out: &Path) -> Result<SynthSummary> {
    let (frames, truth) = generate_scene(spec)?;
    write_frames(out, &frames)?;
    write_file(&out.join(TRUTH_FILE), serde_json::to_string(&truth).expect("truth serializes").as_bytes())?;
    write_file(&out.join("scene.toml"), toml::to_string(spec).expect("scene serializes").as_bytes())?;
    let summary = SynthSummary {
        seed: spec.seed,
        frames: frames.len(),
        sweeps_per_frame: spec.sweeps_per_frame,
        points_per_frame: frames.iter().map(Frame::len).collect(),
        objects: spec.objects.len(),
    };
    info!("wrote {} frames to {}", summary.frames, out.display());
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackSummary {
    pub frames: usize,
    pub instances_per_frame: Vec<usize>,
    pub tracks: usize,
    pub matches: usize,
    /// Track count per track length.
    pub length_histogram: BTreeMap<usize, usize>,
}

pub const TRACKS_FILE: &str = "tracks.jsonl";

/// Tracks the frames in `input`, writing `tracks.jsonl` and `summary.json`.
/// With `golden`, the tracks are also written there.
pub fn track(input: &Path, config: &PipelineConfig, out: &Path, golden: Option<&Path>) -> Result<TrackSummary> {
    let frames = read_frames(input)?;
    info!("read {} frames from {}", frames.len(), input.display());
    let (tracks, instances) = run_tracking(&frames, &config.tracking())?;
    let lines = to_json_lines(&track_records(&tracks));
    write_file(&out.join(TRACKS_FILE), lines.as_bytes())?;
    if let Some(path) = golden {
        write_file(path, lines.as_bytes())?;
        info!("golden tracks written to {}", path.display());
    }
    let summary = TrackSummary {
        frames: frames.len(),
        instances_per_frame: instances.iter().map(|i| i.clusters.len()).collect(),
        tracks: tracks.tracks.len(),
        matches: tracks.tracks.iter().map(|t| t.len() - 1).sum(),
        length_histogram: length_histogram(&tracks),
    };
    write_file(&out.join("summary.json"), to_json_pretty(&summary).as_bytes())?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PretrainOptions {
    pub steps: usize,
    /// Overrides the scene seed; also seeds the training streams.
    pub seed: Option<u64>,
    pub gradcheck: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub seed: u64,
    pub steps: usize,
    pub frames: usize,
    pub tracks: usize,
    pub first_loss: Option<f64>,
    pub last_loss: Option<f64>,
    pub max_gradcheck_error: Option<f64>,
}

pub const LOSS_FILE: &str = "loss.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.json";

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Check(format!("{}: {e}", path.display()))
}

/// Synthesizes the scene, tracks it and runs the pretraining loop. Writes
/// `loss.csv`, `snapshot.json` (final encoders and banks), `features.bin`
/// (target features of the first frame) and `summary.json`. Fails if a loss
/// is not finite or a gradient check exceeds [`GRADCHECK_TOLERANCE`].
pub fn pretrain_sim(scene: &SceneSpec, config: &PipelineConfig, options: PretrainOptions, out: &Path) -> Result<PretrainSummary> {
    let mut spec = scene.clone();
    if let Some(seed) = options.seed {
        spec.seed = seed;
    }
    let seed = spec.seed;
    let (frames, _) = generate_scene(&spec)?;
    let (tracks, instances) = run_tracking(&frames, &config.tracking())?;
    info!("{} frames, {} tracks", frames.len(), tracks.tracks.len());
    let inputs = frames
        .par_iter()
        .zip(&instances)
        .map(|(f, i)| prepare_indexed(f, &i.clusters, &tracks, &config.bev, &config.rig, seed))
        .collect::<Result<Vec<FrameInput>, _>>()?;

    let mut state = initial_state(&config.pretrain, seed)?;
    let loss_path = out.join(LOSS_FILE);
    let mut rows = csv::Writer::from_writer(Vec::new());
    rows.write_record(["step", "loss", "grad_norm"]).map_err(csv_error(&loss_path))?;
    let mut checks = csv::Writer::from_writer(Vec::new());
    checks.write_record(["step", "max_relative_error"]).map_err(csv_error(&loss_path))?;
    let mut first_failure: Option<String> = None;
    let run = RunOptions { steps: options.steps, seed, gradcheck: options.gradcheck };
    let records = pretrain_sequence(&mut state, &inputs, &config.bev, &config.pretrain, run, |r, _| {
        debug!("step {} frame {} loss {:.6}", r.step, r.report.frame, r.report.loss);
        if first_failure.is_none() && !(r.report.loss.is_finite() && r.report.grad_norm.is_finite()) {
            first_failure = Some(format!("step {}: non-finite loss or gradient", r.step));
        }
        if let Some(e) = r.gradcheck {
            if first_failure.is_none() && !(e <= GRADCHECK_TOLERANCE) {
                first_failure = Some(format!("step {}: gradient check error {e:e} exceeds {GRADCHECK_TOLERANCE:e}", r.step));
            }
        }
    })?;
    for r in &records {
        rows.serialize((r.step, r.report.loss, r.report.grad_norm)).map_err(csv_error(&loss_path))?;
        if let Some(e) = r.gradcheck {
            checks.serialize((r.step, e)).map_err(csv_error(&loss_path))?;
        }
    }
    write_file(&loss_path, &rows.into_inner().expect("in-memory writer"))?;
    if options.gradcheck {
        write_file(&out.join("gradcheck.csv"), &checks.into_inner().expect("in-memory writer"))?;
    }
    write_file(&out.join(SNAPSHOT_FILE), to_json_pretty(&state).as_bytes())?;
    if let Some(input) = inputs.iter().find(|i| !i.footprints.is_empty()).or(inputs.first()) {
        write_file(&out.join("features.bin"), &encode_feature_map(&target_features(&state.target, input, &config.bev)?)?)?;
    }

    let summary = PretrainSummary {
        seed,
        steps: records.len(),
        frames: frames.len(),
        tracks: tracks.tracks.len(),
        first_loss: records.first().map(|r| r.report.loss),
        last_loss: records.last().map(|r| r.report.loss),
        max_gradcheck_error: records.iter().filter_map(|r| r.gradcheck).reduce(f64::max),
    };
    write_file(&out.join("summary.json"), to_json_pretty(&summary).as_bytes())?;
    match first_failure {
        Some(msg) => Err(Error::Check(msg)),
        None => Ok(summary),
    }
}

fn target_features(
    encoder: &cohere_core::learn::EncoderParams,
    input: &FrameInput,
    bev: &BevParams,
) -> Result<cohere_core::bev::FeatureMap> {
    let grid = bev.grid()?;
    let bins = bev.bins()?;
    // the merged-depth splat draws nothing from the generator
    let mut unused = stream(0, 0, 0, 0);
    let splat = splat_views(&input.views, &bins, &grid, DepthSource::Target, &mut unused)?;
    Ok(encoder.forward(&encoder_input(&splat))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub metrics: TrackMetrics,
    pub pred_tracks: usize,
    pub gt_objects: usize,
}

/// Scores predicted tracks against ground truth; writes `metrics.json`,
/// `tracks.svg` and `lengths.svg`.
pub fn eval(pred: &Path, truth: &Path, config: &PipelineConfig, out: &Path) -> Result<EvalReport> {
    let gt = read_truth(truth)?;
    let tracks = read_tracks(pred, config.assoc.history)?;
    let known: BTreeSet<usize> = gt.frame_indices().into_iter().collect();
    if let Some(e) = tracks.tracks.iter().flat_map(|t| &t.entries).find(|e| !known.contains(&e.frame)) {
        let range = match (known.first(), known.last()) {
            (Some(a), Some(b)) => format!("{a}..={b}"),
            _ => "none".into(),
        };
        return Err(Error::FrameRange(format!(
            "{} has frame {} but {} covers frames {range}",
            pred.display(),
            e.frame,
            truth.display()
        )));
    }
    let metrics = score_tracks(&tracks, &gt, &config.score);
    let report = EvalReport { metrics, pred_tracks: tracks.tracks.len(), gt_objects: gt.objects };
    write_file(&out.join("metrics.json"), to_json_pretty(&report).as_bytes())?;
    let gt_tracks = gt.to_track_set(config.assoc.history);
    write_file(&out.join("tracks.svg"), plots::track_overlay(&tracks, Some(&gt_tracks)).as_bytes())?;
    write_file(&out.join("lengths.svg"), plots::length_histogram(&length_histogram(&tracks)).as_bytes())?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckCase {
    pub instances: usize,
    pub background: usize,
    pub samples: usize,
    /// Largest deviation relative to the gradient's largest component.
    pub max_relative_error: f64,
    /// Largest per-component relative error; informational, it is dominated by
    /// finite-difference roundoff on components near zero.
    pub max_componentwise_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    pub max_relative_error: f64,
    pub passed: bool,
    pub cases: Vec<GradcheckCase>,
}

fn random_unit<R: Rng>(rng: &mut R, channels: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = (0..channels).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(normalize(&v)?)
}

/// Central-difference check of the contrastive-loss gradient on `cases`
/// random configurations (up to 8 instances, up to 16 background samples,
/// 16 channels). Writes `gradcheck.json`; fails above [`GRADCHECK_TOLERANCE`].
pub fn gradcheck(seed: u64, cases: usize, temperature: f64, out: &Path) -> Result<GradcheckReport> {
    const CHANNELS: usize = 16;
    let results = (0..cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, GRADCHECK, i as u64, 0);
            let m = rng.random_range(1..=8usize);
            let n_b = rng.random_range(0..=16usize);
            let n_f = rng.random_range(m..=m + 24);
            let instances = (0..m).map(|_| random_unit(&mut rng, CHANNELS)).collect::<Result<Vec<_>>>()?;
            let background = (0..n_b).map(|_| random_unit(&mut rng, CHANNELS)).collect::<Result<Vec<_>>>()?;
            let mut online: Vec<Vec<f64>> =
                (0..n_f).map(|_| (0..CHANNELS).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
            let labels: Vec<usize> = (0..n_f).map(|j| if j < m { j } else { rng.random_range(0..m) }).collect();
            let analytic = contrastive_loss(&online, &labels, &instances, &background, temperature)?.grad;
            let mut pairs = Vec::with_capacity(n_f * CHANNELS);
            for j in 0..n_f {
                for c in 0..CHANNELS {
                    let base = online[j][c];
                    online[j][c] = base + GRADCHECK_STEP;
                    let up = contrastive_loss(&online, &labels, &instances, &background, temperature)?.loss;
                    online[j][c] = base - GRADCHECK_STEP;
                    let down = contrastive_loss(&online, &labels, &instances, &background, temperature)?.loss;
                    online[j][c] = base;
                    pairs.push((analytic[j][c], (up - down) / (2.0 * GRADCHECK_STEP)));
                }
            }
            Ok(GradcheckCase {
                instances: m,
                background: n_b,
                samples: n_f,
                max_relative_error: gradient_error(&analytic.concat(), &pairs),
                max_componentwise_error: pairs.iter().map(|&(a, n)| relative_error(a, n)).fold(0.0, f64::max),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max = results.iter().map(|c| c.max_relative_error).fold(0.0, f64::max);
    let report = GradcheckReport {
        seed,
        step: GRADCHECK_STEP,
        tolerance: GRADCHECK_TOLERANCE,
        max_relative_error: max,
        passed: max <= GRADCHECK_TOLERANCE,
        cases: results,
    };
    write_file(&out.join("gradcheck.json"), to_json_pretty(&report).as_bytes())?;
    if report.passed {
        Ok(report)
    } else {
        Err(Error::Check(format!("gradient check error {max:e} exceeds {GRADCHECK_TOLERANCE:e}")))
    }
}

/// Output directory for a command, defaulting to `./out`.
pub fn out_dir(out: Option<PathBuf>) -> PathBuf {
    out.unwrap_or_else(|| PathBuf::from("out"))
}
