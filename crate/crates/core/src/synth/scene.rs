use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::SynthError;
use crate::assoc::{Track, TrackEntry, TrackSet};
use crate::geom::{compose_frame, Frame, Point3, Pose, Sweep};
use crate::math::{self, Vec3};
use crate::rng::{stream, SYNTH_SWEEP};

/// Box-shaped object moving at constant velocity.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BoxObject {
    /// Length, width, height in meters.
    pub size: [f64; 3],
    /// World (x, y) of the box center at t = 0.
    pub center: [f64; 2],
    #[cfg_attr(feature = "serde", serde(default))]
    pub yaw: f64,
    /// World velocity, m/s.
    #[cfg_attr(feature = "serde", serde(default))]
    pub velocity: [f64; 2],
    /// Height of the box bottom above the ground plane.
    #[cfg_attr(feature = "serde", serde(default))]
    pub elevation: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_intensity"))]
    pub intensity: f64,
}

#[cfg(feature = "serde")]
fn default_intensity() -> f64 {
    0.5
}

/// Ego trajectory: constant world velocity and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EgoSpec {
    pub start: [f64; 2],
    pub yaw: f64,
    pub velocity: [f64; 2],
    pub yaw_rate: f64,
}

impl EgoSpec {
    pub fn pose_at(&self, t: f64) -> Pose {
        Pose::from_yaw(
            self.yaw + self.yaw_rate * t,
            [self.start[0] + self.velocity[0] * t, self.start[1] + self.velocity[1] * t, 0.0],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SceneSpec {
    pub seed: u64,
    pub frames: usize,
    pub sweeps_per_frame: usize,
    /// Seconds between consecutive sweeps.
    pub sweep_interval: f64,
    pub ego: EgoSpec,
    pub objects: Vec<BoxObject>,
    /// Standard deviation of the additive point noise, meters.
    pub noise_sigma: f64,
    /// Surface points emitted per visible object per sweep.
    pub points_per_object: usize,
    pub ground_points: usize,
    pub ground_min_range: f64,
    pub ground_max_range: f64,
    /// Objects farther than this from the ego emit no points.
    pub sensor_range: f64,
    /// Largest displacement an object may make between consecutive sweeps.
    pub motion_bound: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 17,
            sweeps_per_frame: 10,
            sweep_interval: 0.05,
            ego: EgoSpec::default(),
            objects: Vec::new(),
            noise_sigma: 0.02,
            points_per_object: 60,
            ground_points: 520,
            ground_min_range: 2.0,
            ground_max_range: 40.0,
            sensor_range: 50.0,
            motion_bound: 0.5,
        }
    }
}

impl SceneSpec {
    pub fn frame_period(&self) -> f64 {
        self.sweeps_per_frame as f64 * self.sweep_interval
    }

    /// Timestamp of sweep `sweep` of frame `frame`.
    pub fn sweep_time(&self, frame: usize, sweep: usize) -> f64 {
        (frame * self.sweeps_per_frame + sweep) as f64 * self.sweep_interval
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidScene(String::from(m)));
        if self.sweeps_per_frame < 2 {
            return bad("sweeps_per_frame must be at least 2");
        }
        if self.frames == 0 {
            return bad("frames must be positive");
        }
        if !(self.sweep_interval.is_finite() && self.sweep_interval > 0.0) {
            return bad("sweep_interval must be positive");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be non-negative");
        }
        if !(self.ground_min_range >= 0.0 && self.ground_max_range > self.ground_min_range) {
            return bad("ground ranges must satisfy 0 <= min < max");
        }
        if self.points_per_object % 2 == 1 {
            return bad("points_per_object must be even");
        }
        if self.ground_points == 0 {
            // every sweep needs at least one point
            return bad("ground_points must be positive");
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.size.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(SynthError::InvalidScene(format!("object {i} has a non-positive size")));
            }
            if !(o.elevation.is_finite() && o.elevation >= 0.0) {
                return Err(SynthError::InvalidScene(format!("object {i} has a negative elevation")));
            }
        }
        for i in 0..self.objects.len() {
            for j in i + 1..self.objects.len() {
                if boxes_overlap(&self.objects[i], &self.objects[j]) {
                    return Err(SynthError::InvalidScene(format!("objects {i} and {j} overlap at t = 0")));
                }
            }
        }
        Ok(())
    }

    /// Objects whose per-sweep displacement exceeds `motion_bound`.
    pub fn warnings(&self) -> Vec<String> {
        self.objects
            .iter()
            .enumerate()
            .filter_map(|(i, o)| {
                let step = math::hypot(o.velocity[0], o.velocity[1]) * self.sweep_interval;
                (step > self.motion_bound)
                    .then(|| format!("object {i} moves {step:.3} m between sweeps (bound {:.3} m)", self.motion_bound))
            })
            .collect()
    }

    pub fn object_pose(&self, object: usize, t: f64) -> Pose {
        let o = &self.objects[object];
        Pose::from_yaw(o.yaw, [o.center[0] + o.velocity[0] * t, o.center[1] + o.velocity[1] * t, o.elevation])
    }

    fn object_visible(&self, object: usize, t: f64) -> bool {
        let c = self.object_pose(object, t).translation();
        let e = self.ego.pose_at(t).translation();
        math::hypot(c[0] - e[0], c[1] - e[1]) <= self.sensor_range
    }
}

fn footprint_corners(o: &BoxObject) -> [[f64; 2]; 4] {
    let (s, c) = (math::sin(o.yaw), math::cos(o.yaw));
    let (hl, hw) = (o.size[0] / 2.0, o.size[1] / 2.0);
    [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]].map(|[x, y]| [o.center[0] + c * x - s * y, o.center[1] + s * x + c * y])
}

/// Separating-axis test on the footprints plus a vertical interval check.
fn boxes_overlap(a: &BoxObject, b: &BoxObject) -> bool {
    let z_sep = a.elevation + a.size[2] <= b.elevation || b.elevation + b.size[2] <= a.elevation;
    if z_sep {
        return false;
    }
    let (ca, cb) = (footprint_corners(a), footprint_corners(b));
    for corners in [&ca, &cb] {
        for k in 0..2 {
            let e = [corners[k + 1][0] - corners[k][0], corners[k + 1][1] - corners[k][1]];
            let axis = [-e[1], e[0]];
            let proj = |pts: &[[f64; 2]; 4]| {
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let d = p[0] * axis[0] + p[1] * axis[1];
                    (lo.min(d), hi.max(d))
                })
            };
            let (a_lo, a_hi) = proj(&ca);
            let (b_lo, b_hi) = proj(&cb);
            if a_hi <= b_lo || b_hi <= a_lo {
                return false;
            }
        }
    }
    true
}

/// Antithetic pairs per face group (top, ±x sides, ±y sides), allocated
/// proportionally to area by largest remainder.
pub fn face_pairs(object: &BoxObject, points: usize) -> [usize; 3] {
    let [l, w, h] = object.size;
    let areas = [l * w, 2.0 * w * h, 2.0 * l * h];
    let total: f64 = areas.iter().sum();
    let pairs = points / 2;
    let quotas = areas.map(|a| a / total * pairs as f64);
    let mut counts = quotas.map(|q| math::floor(q) as usize);
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| (quotas[j] - counts[j] as f64).total_cmp(&(quotas[i] - counts[i] as f64)).then(i.cmp(&j)));
    let mut left = pairs - counts.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Noise-free surface samples of one object for one sweep, box-local (bottom
/// face at z = 0 and not sampled). Samples come in point-symmetric pairs, so
/// their mean is the same for every sweep.
pub fn sample_surface<R: Rng + ?Sized>(object: &BoxObject, points: usize, rng: &mut R) -> Vec<Vec3> {
    let [l, w, h] = object.size;
    let [top, xs, ys] = face_pairs(object, points);
    let mut out = Vec::with_capacity(points);
    for _ in 0..top {
        let (a, b) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        out.push([a * l, b * w, h]);
        out.push([-a * l, -b * w, h]);
    }
    for _ in 0..xs {
        let (a, z) = (rng.random::<f64>() - 0.5, rng.random::<f64>() * h);
        out.push([l / 2.0, a * w, z]);
        out.push([-l / 2.0, -a * w, h - z]);
    }
    for _ in 0..ys {
        let (a, z) = (rng.random::<f64>() - 0.5, rng.random::<f64>() * h);
        out.push([a * l, w / 2.0, z]);
        out.push([-a * l, -w / 2.0, h - z]);
    }
    out
}

/// World-frame mean of an object's noise-free samples at time `t`.
pub fn object_centroid(spec: &SceneSpec, object: usize, t: f64) -> Vec3 {
    let o = &spec.objects[object];
    let [top, xs, ys] = face_pairs(o, spec.points_per_object);
    let h = o.size[2];
    let z = (top as f64 * h + (xs + ys) as f64 * h / 2.0) / (top + xs + ys) as f64;
    spec.object_pose(object, t).apply([0.0, 0.0, z])
}

/// Centers of one object in one frame, world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ObjectCenters {
    pub object: usize,
    /// Center at the first sweep of the frame.
    pub first: Vec3,
    /// Center at the last sweep of the frame.
    pub last: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameTruth {
    pub frame: usize,
    /// Object id per merged point, `None` for ground.
    pub labels: Vec<Option<usize>>,
    /// Objects visible in both the first and the last sweep.
    pub centers: Vec<ObjectCenters>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GroundTruth {
    pub objects: usize,
    pub frames: Vec<FrameTruth>,
}

impl GroundTruth {
    /// Per-object list of frames in which the object has centers.
    pub fn trajectories(&self) -> Vec<Vec<(usize, ObjectCenters)>> {
        let mut out: Vec<Vec<(usize, ObjectCenters)>> = (0..self.objects).map(|_| Vec::new()).collect();
        for f in &self.frames {
            for c in &f.centers {
                out[c.object].push((f.frame, *c));
            }
        }
        out
    }

    /// One track per object, entries at the object's last-sweep centers.
    pub fn to_track_set(&self, history: usize) -> TrackSet {
        let tracks = self
            .trajectories()
            .into_iter()
            .filter(|t| !t.is_empty())
            .enumerate()
            .map(|(id, traj)| Track {
                id,
                entries: traj.iter().map(|(frame, c)| TrackEntry { frame: *frame, cluster: c.object, center: c.last }).collect(),
                alive: true,
            })
            .collect();
        TrackSet { tracks, history }
    }

    /// Frame indices covered, ascending.
    pub fn frame_indices(&self) -> Vec<usize> {
        self.frames.iter().map(|f| f.frame).collect()
    }
}

/// Generates one frame of the scene with its ground truth.
pub fn generate_frame(spec: &SceneSpec, frame: usize) -> Result<(Frame, FrameTruth), SynthError> {
    let normal = Normal::new(0.0, spec.noise_sigma).map_err(|_| SynthError::InvalidScene(String::from("bad noise sigma")))?;
    let s = spec.sweeps_per_frame;
    let mut sweeps = Vec::with_capacity(s);
    let mut labels = Vec::new();
    for k in 0..s {
        let t = spec.sweep_time(frame, k);
        let ego = spec.ego.pose_at(t);
        let mut rng = stream(spec.seed, SYNTH_SWEEP, frame as u64, k as u64);
        let mut points = Vec::new();
        for (id, object) in spec.objects.iter().enumerate() {
            if !spec.object_visible(id, t) {
                continue;
            }
            let pose = spec.object_pose(id, t);
            for p in sample_surface(object, spec.points_per_object, &mut rng) {
                let w = pose.apply(p);
                let noisy = [w[0] + normal.sample(&mut rng), w[1] + normal.sample(&mut rng), w[2] + normal.sample(&mut rng)];
                let e = ego.apply_inverse(noisy);
                points.push(Point3::with_intensity(e[0], e[1], e[2], object.intensity));
                labels.push(Some(id));
            }
        }
        let origin = ego.translation();
        for _ in 0..spec.ground_points {
            let r = rng.random_range(spec.ground_min_range..spec.ground_max_range);
            let a = rng.random_range(-core::f64::consts::PI..core::f64::consts::PI);
            let w = [origin[0] + r * math::cos(a), origin[1] + r * math::sin(a), normal.sample(&mut rng)];
            let e = ego.apply_inverse(w);
            points.push(Point3::with_intensity(e[0], e[1], e[2], 0.1));
            labels.push(None);
        }
        sweeps.push(Sweep { timestamp: t, points, pose: ego });
    }
    let composed = compose_frame(frame, sweeps)?;
    let (t0, t1) = (spec.sweep_time(frame, 0), spec.sweep_time(frame, s - 1));
    let centers = (0..spec.objects.len())
        .filter(|&id| spec.object_visible(id, t0) && spec.object_visible(id, t1))
        .map(|id| ObjectCenters { object: id, first: object_centroid(spec, id, t0), last: object_centroid(spec, id, t1) })
        .collect();
    Ok((composed, FrameTruth { frame, labels, centers }))
}

/// Generates all frames of the scene.
pub fn generate(spec: &SceneSpec) -> Result<(Vec<Frame>, GroundTruth), SynthError> {
    spec.validate()?;
    let mut frames = Vec::with_capacity(spec.frames);
    let mut truth = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let (frame, t) = generate_frame(spec, f)?;
        frames.push(frame);
        truth.push(t);
    }
    Ok((frames, GroundTruth { objects: spec.objects.len(), frames: truth }))
}
