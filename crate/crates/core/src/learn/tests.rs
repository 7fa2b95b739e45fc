use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bev::{BevParams, CameraModel, DepthBins, DepthDistribution, FeatureMap, GridSpec, ImageFeatures, OccupancyMask};
use crate::math;

fn grid() -> GridSpec {
    GridSpec::new(-4.0, 4.0, -4.0, 4.0, 1.0).unwrap()
}

fn unit_random(rng: &mut ChaCha8Rng, c: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..c).map(|_| rng.random::<f64>() - 0.5).collect();
    normalize(&v).unwrap()
}

#[test]
fn instance_feature_of_constant_map() {
    let g = grid();
    let map = FeatureMap::from_data(g, 2, [3.0, -1.0].repeat(g.cells())).unwrap();
    let plan = SamplePlan {
        foreground: vec![ForegroundSample { instance: 0, x: 0.1, y: 0.7 }, ForegroundSample { instance: 0, x: -2.3, y: 1.9 }],
        background: vec![],
    };
    let f = instance_feature(&map, &plan, 0).unwrap();
    assert!((f[0] - 3.0).abs() < 1e-12 && (f[1] + 1.0).abs() < 1e-12);
    assert_eq!(instance_feature(&map, &plan, 1), Err(LearnError::NoSamples(1)));
}

#[test]
fn instance_feature_two_samples() {
    let g = grid();
    let mut map = FeatureMap::zeros(g, 2);
    map.cell_mut(1, 1).copy_from_slice(&[1.0, 0.0]);
    map.cell_mut(5, 5).copy_from_slice(&[0.0, 1.0]);
    let (x0, y0) = g.cell_center(1, 1);
    let (x1, y1) = g.cell_center(5, 5);
    let plan = SamplePlan {
        foreground: vec![ForegroundSample { instance: 0, x: x0, y: y0 }, ForegroundSample { instance: 0, x: x1, y: y1 }],
        background: vec![],
    };
    assert_eq!(instance_feature(&map, &plan, 0).unwrap(), vec![0.5, 0.5]);
}

#[test]
fn temporal_average_single_frame() {
    let mut bank = MemoryBank::new(16);
    bank.push(4, 2, vec![3.0, 4.0]).unwrap();
    assert_eq!(bank.temporal_mean(4).unwrap(), vec![3.0, 4.0]);
    assert_eq!(bank.temporal_average(4).unwrap(), vec![0.6, 0.8]);
    assert_eq!(bank.temporal_mean(5), Err(LearnError::NoHistory(5)));
}

#[test]
fn opposite_features_are_degenerate() {
    let mut bank = MemoryBank::new(16);
    bank.push(0, 0, vec![1.0, -2.0]).unwrap();
    bank.push(0, 1, vec![-1.0, 2.0]).unwrap();
    assert_eq!(bank.temporal_average(0), Err(LearnError::NormalizationDegenerate));
}

#[test]
fn bank_keeps_latest_window() {
    let mut bank = MemoryBank::new(2);
    for f in 0..5 {
        bank.push(0, f, vec![f as f64]).unwrap();
    }
    let frames: Vec<usize> = bank.get(0).unwrap().entries.iter().map(|e| e.0).collect();
    assert_eq!(frames, vec![2, 3, 4]);
    assert_eq!(bank.get(0).unwrap().created, 0);
    assert_eq!(bank.temporal_mean(0).unwrap(), vec![3.0]);
    assert!(matches!(bank.push(0, 4, vec![0.0]), Err(LearnError::FrameOrder { .. })));
}

#[test]
fn stale_banks_are_evicted() {
    let mut bank = MemoryBank::new(2);
    bank.push(0, 0, vec![1.0]).unwrap();
    bank.push(1, 1, vec![1.0]).unwrap();
    bank.evict_stale(2);
    assert_eq!(bank.len(), 2);
    bank.evict_stale(3);
    assert!(bank.get(0).is_none() && bank.get(1).is_some());
}

#[test]
fn ema_limits() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = EncoderParams::random(3, 2, 1.0, &mut rng);
    let b = EncoderParams::random(3, 2, 1.0, &mut rng);
    assert_eq!(ema_update(&a, &b, 1.0).unwrap(), a);
    assert_eq!(ema_update(&a, &b, 0.0).unwrap(), b);
    assert_eq!(ema_update(&a, &b, 1.5), Err(LearnError::BadMomentum(1.5)));
    assert!(ema_update(&a, &EncoderParams::zeros(2, 2), 0.5).is_err());
}

#[test]
fn ema_geometric_decay() {
    let mut target = EncoderParams { inputs: 1, outputs: 1, theta: vec![1.0, 1.0] };
    let online = EncoderParams::zeros(1, 1);
    for _ in 0..50 {
        target = ema_update(&target, &online, 0.99).unwrap();
    }
    let expected = math::pow(0.99, 50.0);
    assert!(target.theta.iter().all(|t| (t - expected).abs() < 1e-14));
}

#[test]
fn lone_positive_has_zero_loss() {
    let t = vec![0.6, 0.8];
    let out = contrastive_loss(&[vec![1.2, 1.6]], &[0], &[t], &[], 0.1).unwrap();
    assert_eq!(out.loss, 0.0);
    assert!(out.grad[0].iter().all(|g| g.abs() < 1e-15));
}

#[test]
fn symmetric_negative_gives_ln2() {
    let a = vec![1.0, 0.0, 0.0];
    let b = vec![0.0, 1.0, 0.0];
    let f = vec![0.0, 0.0, 1.0];
    let out = contrastive_loss(&[f], &[0], &[a, b], &[], 0.1).unwrap();
    assert!((out.loss - core::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn loss_rejects_bad_inputs() {
    let t = vec![1.0, 0.0];
    assert_eq!(contrastive_loss(&[t.clone()], &[0], &[t.clone()], &[], 0.0), Err(LearnError::BadTemperature(0.0)));
    assert!(matches!(contrastive_loss(&[t.clone()], &[0], &[vec![2.0, 0.0]], &[], 0.1), Err(LearnError::NotNormalized(_))));
    assert_eq!(contrastive_loss(&[vec![0.0, 0.0]], &[0], &[t], &[], 0.1), Err(LearnError::NormalizationDegenerate));
}

fn loss_fd(online: &[Vec<f64>], labels: &[usize], inst: &[Vec<f64>], bg: &[Vec<f64>], tau: f64) -> f64 {
    let analytic = contrastive_loss(online, labels, inst, bg, tau).unwrap().grad;
    let h = 1e-6;
    let mut pairs = Vec::new();
    let mut x = online.to_vec();
    for j in 0..online.len() {
        for c in 0..online[j].len() {
            let base = x[j][c];
            x[j][c] = base + h;
            let up = contrastive_loss(&x, labels, inst, bg, tau).unwrap().loss;
            x[j][c] = base - h;
            let down = contrastive_loss(&x, labels, inst, bg, tau).unwrap().loss;
            x[j][c] = base;
            pairs.push((analytic[j][c], (up - down) / (2.0 * h)));
        }
    }
    let flat: Vec<f64> = analytic.concat();
    gradient_error(&flat, &pairs)
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (m, n_b, c, n_f) = (5, 8, 16, 20);
    let inst: Vec<Vec<f64>> = (0..m).map(|_| unit_random(&mut rng, c)).collect();
    let bg: Vec<Vec<f64>> = (0..n_b).map(|_| unit_random(&mut rng, c)).collect();
    let online: Vec<Vec<f64>> = (0..n_f).map(|_| (0..c).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()).collect();
    let labels: Vec<usize> = (0..n_f).map(|j| j % m).collect();
    let err = loss_fd(&online, &labels, &inst, &bg, 0.1);
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn gradient_error_is_scale_relative() {
    assert_eq!(gradient_error(&[2.0, 0.0], &[(2.0, 2.0), (0.0, 1e-6)]), 5e-7);
    assert_eq!(gradient_error(&[0.0], &[(0.0, 0.0)]), 0.0);
    assert_eq!(relative_error(1.0, 0.5), 0.5);
}

#[test]
fn allocation_is_proportional_with_floor_of_one() {
    assert_eq!(allocate(&[1, 1], 2).unwrap(), vec![1, 1]);
    assert_eq!(allocate(&[3, 1], 6).unwrap(), vec![4, 2]);
    assert_eq!(allocate(&[100, 1], 10).unwrap(), vec![9, 1]);
    assert_eq!(allocate(&[1, 1, 1], 2), Err(LearnError::TooFewSamples { instances: 3, samples: 2 }));
    assert_eq!(allocate(&[1, 0], 5), Err(LearnError::EmptyFootprint(1)));
    let a = allocate(&[7, 3, 11, 2], 1000).unwrap();
    assert_eq!(a.iter().sum::<usize>(), 1000);
}

fn mask_with(grid: GridSpec, occupied: &[(usize, usize)]) -> OccupancyMask {
    use crate::cluster::{Cluster, ClusteringResult};
    use crate::geom::{compose_frame, Point3, Pose, Sweep};
    let mut pts: Vec<Point3> = occupied
        .iter()
        .map(|&(r, c)| {
            let (x, y) = grid.cell_center(r, c);
            Point3::new(x, y, 1.0)
        })
        .collect();
    if pts.is_empty() {
        // off-grid placeholder: sweeps may not be empty
        pts.push(Point3::new(1e3, 1e3, 1.0));
    }
    let n = pts.len();
    let sweeps = vec![
        Sweep { timestamp: 0.0, points: pts.clone(), pose: crate::Pose::identity() },
        Sweep { timestamp: 0.1, points: pts, pose: Pose::identity() },
    ];
    let frame = compose_frame(0, sweeps).unwrap();
    let cluster = Cluster {
        id: 0,
        points: (0..2 * n).collect(),
        first_scan: (0..n).collect(),
        last_scan: (n..2 * n).collect(),
        first_center: [0.0; 3],
        last_center: [0.0; 3],
    };
    crate::bev::occupancy_mask(&grid, &frame, &ClusteringResult { clusters: vec![cluster], noise: vec![], discarded: 0 }, 0)
}

#[test]
fn plan_respects_footprints_and_free_cells() {
    let g = grid();
    let fp = vec![vec![(0, 0), (0, 1)], vec![(4, 4)]];
    let occupied: Vec<(usize, usize)> = fp.iter().flatten().copied().collect();
    let mask = mask_with(g, &occupied);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let plan = plan_samples(&g, &fp, &mask, 30, 50, &mut rng).unwrap();
    assert_eq!(plan.foreground.len(), 30);
    assert_eq!(plan.count(0), 20);
    assert_eq!(plan.count(1), 10);
    for s in &plan.foreground {
        let cell = g.cell_of(s.x, s.y).unwrap();
        assert!(fp[s.instance].contains(&cell), "{s:?}");
        assert!(g.sampleable(s.x, s.y));
    }
    for &(x, y) in &plan.background {
        let (r, c) = g.cell_of(x, y).unwrap();
        assert!(!mask.get(r, c));
        assert!(g.sampleable(x, y));
    }
}

#[test]
fn encoder_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let g = grid();
    let inputs = 3;
    let data: Vec<f64> = (0..g.cells() * inputs).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let input = FeatureMap::from_data(g, inputs, data).unwrap();
    let params = EncoderParams::random(inputs, 8, 0.8, &mut rng);
    let fp = vec![vec![(1, 1), (1, 2), (2, 2)], vec![(5, 6)], vec![(6, 2), (6, 3)]];
    let occupied: Vec<(usize, usize)> = fp.iter().flatten().copied().collect();
    let plan = plan_samples(&g, &fp, &mask_with(g, &occupied), 24, 10, &mut rng).unwrap();
    let batch = OnlineBatch {
        input,
        plan,
        instance_targets: (0..3).map(|_| unit_random(&mut rng, 8)).collect(),
        background_targets: (0..10).map(|_| unit_random(&mut rng, 8)).collect(),
        temperature: 0.1,
    };
    let all: Vec<usize> = (0..params.len()).collect();
    let err = gradient_check(&params, &batch, &all, 1e-6).unwrap();
    assert!(err <= 1e-5, "relative error {err}");
}

fn blind_input(frame: usize, tracks: Vec<usize>) -> (FrameInput, BevParams) {
    // no measured depths: target splat equals the undropped online splat
    let bev = BevParams { half_extent: 8.0, cell: 1.0, depth_bins: 8, depth_start: 0.0, depth_step: 1.0, occupancy_dilation: 1 };
    let grid = bev.grid().unwrap();
    let cam = CameraModel::horizontal(0.3, 1.0, 4.0, 6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(frame as u64);
    let image = ImageFeatures::new(3, 6, PIXEL_CHANNELS, (0..72).map(|_| rng.random::<f64>()).collect()).unwrap();
    let depths = (0..18).map(|_| DepthDistribution::uniform(8)).collect();
    let footprints: Vec<Vec<(usize, usize)>> = tracks.iter().enumerate().map(|(i, _)| vec![(9, 10 + i), (10, 10 + i)]).collect();
    let occupied: Vec<(usize, usize)> = footprints.iter().flatten().copied().collect();
    let occupancy = mask_with(grid, &occupied);
    let views = vec![CameraView { camera: cam, image, depths }];
    (FrameInput { frame, footprints, tracks, occupancy, views }, bev)
}

#[test]
fn step_with_identical_branches_matches_direct_loss() {
    let (input, bev) = blind_input(0, vec![7]);
    let params =
        PretrainParams { foreground_samples: 12, background_samples: 9, dropout: 0.0, learning_rate: 0.0, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut state = PretrainState::new(&params, &mut rng).unwrap();
    let before = state.clone();
    let report = pretrain_step(&mut state, &input, &bev, &params, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert!(report.loss.is_finite());

    // independent evaluation on the same draws
    let grid = bev.grid().unwrap();
    let bins = DepthBins::new(0.0, 1.0, 8).unwrap();
    let mut draws = ChaCha8Rng::seed_from_u64(9);
    let splat = splat_views(&input.views, &bins, &grid, DepthSource::Online { dropout: 0.0 }, &mut draws).unwrap();
    let _ = splat_views(&input.views, &bins, &grid, DepthSource::Target, &mut draws).unwrap();
    let map = before.online.forward(&encoder_input(&splat)).unwrap();
    let plan = plan_samples(&grid, &input.footprints, &input.occupancy, 12, 9, &mut draws).unwrap();
    let online: Vec<Vec<f64>> = plan.foreground.iter().map(|s| map.sample_bilinear(s.x, s.y).unwrap()).collect();
    let labels = vec![0; online.len()];
    let avg = normalize(&instance_feature(&map, &plan, 0).unwrap()).unwrap();
    let bg: Vec<Vec<f64>> =
        plan.background.iter().map(|&(x, y)| normalize(&map.sample_bilinear(x, y).unwrap()).unwrap()).collect();
    let direct = contrastive_loss(&online, &labels, &[avg], &bg, 0.1).unwrap().loss;
    assert!((report.loss - direct).abs() < 1e-12, "{} vs {direct}", report.loss);
    assert_eq!(state.bank.get(7).unwrap().entries.len(), 1);
}

#[test]
fn unmatched_track_bank_is_untouched() {
    let params = PretrainParams { foreground_samples: 8, background_samples: 4, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut state = PretrainState::new(&params, &mut rng).unwrap();
    let (first, bev) = blind_input(0, vec![0, 1]);
    pretrain_step(&mut state, &first, &bev, &params, &mut rng).unwrap();
    let kept = state.bank.get(0).cloned();
    let (second, _) = blind_input(1, vec![1]);
    pretrain_step(&mut state, &second, &bev, &params, &mut rng).unwrap();
    assert_eq!(state.bank.get(0).cloned(), kept);
    assert_eq!(state.bank.get(1).unwrap().entries.len(), 2);
}

#[test]
fn empty_frame_is_skipped() {
    let params = PretrainParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut state = PretrainState::new(&params, &mut rng).unwrap();
    let (input, bev) = blind_input(3, vec![]);
    let before = state.clone();
    assert_eq!(pretrain_step(&mut state, &input, &bev, &params, &mut rng), Err(LearnError::SkippedFrame(3)));
    assert_eq!(state.online, before.online);
}
