//! Rigid poses, point transforms and assembly of multi-sweep frames.

use alloc::vec::Vec;

use crate::math::{self, Mat3, Vec3};

/// Orthonormality and determinant tolerance for rotation matrices.
pub const ROTATION_TOL: f64 = 1e-9;
/// Largest accepted deviation of a quaternion's norm from 1.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("frame needs at least 2 sweeps, got {0}")]
    FrameUnderfilled(usize),
    #[error("invalid pose: {0}")]
    BadPose(&'static str),
    #[error("sweep {0} timestamp is not after the previous sweep")]
    NonMonotoneTimestamps(usize),
    #[error("sweep {0} has no points")]
    EmptySweep(usize),
    #[error("non-finite point coordinate in sweep {0}")]
    NonFinitePoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z, intensity: 0.0 }
    }

    pub const fn with_intensity(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn from_array(v: Vec3) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    #[inline]
    pub fn xyz(&self) -> Vec3 {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.intensity.is_finite()
    }
}

/// Rigid transform mapping a local frame into a parent frame: `x_parent = R x_local + p`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    rotation: Mat3,
    translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub const fn identity() -> Self {
        Self { rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], translation: [0.0; 3] }
    }

    /// Builds a pose from a rotation matrix, checking that it is a proper rotation.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeomError> {
        let pose = Self { rotation, translation };
        pose.validate()?;
        Ok(pose)
    }

    /// Builds a pose from a unit quaternion `[w, x, y, z]`.
    pub fn from_quaternion(q: [f64; 4], translation: Vec3) -> Result<Self, GeomError> {
        if q.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeomError::BadPose("non-finite quaternion or translation"));
        }
        let n = math::sqrt(q.iter().map(|v| v * v).sum());
        if (n - 1.0).abs() > QUATERNION_NORM_TOL {
            return Err(GeomError::BadPose("quaternion is not unit norm"));
        }
        let [w, x, y, z] = [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        let rotation = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ];
        Self::new(rotation, translation)
    }

    /// Rotation about +z by `yaw` radians followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        let (s, c) = (math::sin(yaw), math::cos(yaw));
        Self { rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]], translation }
    }

    pub fn translation_only(translation: Vec3) -> Self {
        Self { translation, ..Self::identity() }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> Vec3 {
        self.translation
    }

    /// Unit quaternion `[w, x, y, z]` with `w >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let m = &self.rotation;
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = math::sqrt(trace + 1.0) * 2.0;
            [0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s]
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = math::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
            [(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s]
        } else if m[1][1] > m[2][2] {
            let s = math::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
            [(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s]
        } else {
            let s = math::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
            [(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s]
        };
        let n = math::sqrt(q.iter().map(|v| v * v).sum());
        let sign = if q[0] < 0.0 { -1.0 } else { 1.0 };
        [sign * q[0] / n, sign * q[1] / n, sign * q[2] / n, sign * q[3] / n]
    }

    pub fn validate(&self) -> Result<(), GeomError> {
        let r = &self.rotation;
        if r.iter().flatten().chain(self.translation.iter()).any(|v| !v.is_finite()) {
            return Err(GeomError::BadPose("non-finite entry"));
        }
        let rtr = math::mat_mul(&math::transpose(r), r);
        for (i, row) in rtr.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                if (v - expected).abs() > ROTATION_TOL {
                    return Err(GeomError::BadPose("rotation is not orthonormal"));
                }
            }
        }
        if (math::det(r) - 1.0).abs() > ROTATION_TOL {
            return Err(GeomError::BadPose("rotation determinant is not +1"));
        }
        Ok(())
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        math::add(math::mat_vec(&self.rotation, v), self.translation)
    }

    /// `Rᵀ (v − p)`: maps a parent-frame vector into the local frame.
    #[inline]
    pub fn apply_inverse(&self, v: Vec3) -> Vec3 {
        math::mat_t_vec(&self.rotation, math::sub(v, self.translation))
    }

    pub fn inverse(&self) -> Self {
        let rt = math::transpose(&self.rotation);
        let t = math::mat_vec(&rt, self.translation);
        Self { rotation: rt, translation: [-t[0], -t[1], -t[2]] }
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Pose) -> Self {
        Self { rotation: math::mat_mul(&self.rotation, &other.rotation), translation: self.apply(other.translation) }
    }

    /// Motion of the ego from `prev` to `curr`, expressed in `prev`'s frame:
    /// `x_prev = R x_curr + p`.
    pub fn relative(prev: &Pose, curr: &Pose) -> Self {
        prev.inverse().compose(curr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub timestamp: f64,
    pub points: Vec<Point3>,
    /// Sweep ego frame to world.
    pub pose: Pose,
}

/// A point of a merged frame, tagged with its source sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaggedPoint {
    pub point: Point3,
    pub sweep: u32,
}

/// All sweeps between two camera timestamps, expressed in the ego frame of the
/// last sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub index: usize,
    pub sweeps: Vec<Sweep>,
    pub frame_pose: Pose,
    pub merged_points: Vec<TaggedPoint>,
}

impl Frame {
    pub fn sweep_count(&self) -> usize {
        self.sweeps.len()
    }

    pub fn first_sweep(&self) -> u32 {
        0
    }

    pub fn last_sweep(&self) -> u32 {
        (self.sweeps.len() - 1) as u32
    }

    pub fn len(&self) -> usize {
        self.merged_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged_points.is_empty()
    }
}

/// Merges sweeps into the coordinate system of the last sweep.
pub fn compose_frame(index: usize, sweeps: Vec<Sweep>) -> Result<Frame, GeomError> {
    if sweeps.len() < 2 {
        return Err(GeomError::FrameUnderfilled(sweeps.len()));
    }
    for (i, sweep) in sweeps.iter().enumerate() {
        sweep.pose.validate()?;
        if sweep.points.is_empty() {
            return Err(GeomError::EmptySweep(i));
        }
        if sweep.points.iter().any(|p| !p.is_finite()) {
            return Err(GeomError::NonFinitePoint(i));
        }
        if i > 0 && !(sweep.timestamp > sweeps[i - 1].timestamp) {
            return Err(GeomError::NonMonotoneTimestamps(i));
        }
    }
    let frame_pose = sweeps[sweeps.len() - 1].pose;
    let total = sweeps.iter().map(|s| s.points.len()).sum();
    let mut merged_points = Vec::with_capacity(total);
    for (tag, sweep) in sweeps.iter().enumerate() {
        // sweep ego -> frame ego in one pose
        let to_frame = frame_pose.inverse().compose(&sweep.pose);
        merged_points.extend(sweep.points.iter().map(|p| {
            let q = to_frame.apply(p.xyz());
            TaggedPoint { point: Point3::with_intensity(q[0], q[1], q[2], p.intensity), sweep: tag as u32 }
        }));
    }
    Ok(Frame { index, sweeps, frame_pose, merged_points })
}

/// Re-expresses a previous-frame point in the current frame given the relative
/// ego motion `(R, p)` from the previous to the current frame: `Rᵀc − Rᵀp`.
pub fn transfer_center_relative(c: Vec3, motion: &Pose) -> Vec3 {
    let r = motion.rotation();
    let rc = math::mat_t_vec(r, c);
    let rp = math::mat_t_vec(r, motion.translation());
    math::sub(rc, rp)
}

/// Expresses a center from the previous frame's ego coordinates in the current
/// frame's ego coordinates, using the two absolute frame poses.
pub fn transfer_center(c: Vec3, pose_prev: &Pose, pose_curr: &Pose) -> Result<Vec3, GeomError> {
    pose_prev.validate()?;
    pose_curr.validate()?;
    Ok(transfer_center_relative(c, &Pose::relative(pose_prev, pose_curr)))
}
