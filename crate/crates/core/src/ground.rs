//! Polar-grid ground segmentation with incremental line fitting.
//!
//! The BEV plane around the ego is cut into angular segments. Inside a segment
//! points are binned by planar range and the lowest point of each bin becomes a
//! prototype. Prototypes are swept outward and grown into 2D line segments
//! `z = slope * r + intercept` as long as the fit stays flat and tight enough.
//! A point is ground when its height is within `ground_threshold` of the line
//! model of its segment.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geom::Frame;
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroundError {
    #[error("frame has no points")]
    EmptyInput,
    #[error("invalid ground parameter: {0}")]
    BadParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct GroundParams {
    /// Number of angular segments.
    pub segments: usize,
    /// Radial bin width, meters.
    pub bin_width: f64,
    /// Points farther than this (planar range) are never ground.
    pub max_range: f64,
    /// Largest |slope| of a ground line.
    pub max_slope: f64,
    /// Largest RMSE of a ground line fit, meters.
    pub line_rmse: f64,
    /// Largest vertical distance of a prototype from the line it extends.
    pub point_offset: f64,
    /// Vertical distance to the line model below which a point is ground.
    pub ground_threshold: f64,
    /// Largest height step between the start of a new line and the end of the
    /// previous one.
    pub max_step: f64,
    /// Height of the ego origin above the ground plane.
    pub sensor_height: f64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            segments: 180,
            bin_width: 1.0,
            max_range: 60.0,
            max_slope: 0.15,
            line_rmse: 0.05,
            point_offset: 0.1,
            ground_threshold: 0.3,
            max_step: 0.2,
            sensor_height: 0.0,
        }
    }
}

impl GroundParams {
    pub fn validate(&self) -> Result<(), GroundError> {
        if self.segments == 0 {
            return Err(GroundError::BadParams("segments must be positive"));
        }
        let positive = [self.bin_width, self.max_range];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(GroundError::BadParams("bin_width and max_range must be positive"));
        }
        let non_negative = [self.max_slope, self.line_rmse, self.point_offset, self.ground_threshold, self.max_step];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(GroundError::BadParams("thresholds must be finite and non-negative"));
        }
        if !self.sensor_height.is_finite() {
            return Err(GroundError::BadParams("sensor_height must be finite"));
        }
        Ok(())
    }

    fn bins(&self) -> usize {
        (self.max_range / self.bin_width) as usize + 1
    }
}

/// Piecewise ground model of one segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundLine {
    pub slope: f64,
    pub intercept: f64,
    pub r_start: f64,
    pub r_end: f64,
}

impl GroundLine {
    #[inline]
    pub fn height_at(&self, r: f64) -> f64 {
        self.slope * r + self.intercept
    }

    fn range_gap(&self, r: f64) -> f64 {
        if r < self.r_start {
            self.r_start - r
        } else if r > self.r_end {
            r - self.r_end
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundLabeling {
    pub is_ground: Vec<bool>,
    pub params: GroundParams,
    /// Line models per segment; empty for segments that used the flat fallback.
    pub lines: Vec<Vec<GroundLine>>,
}

impl GroundLabeling {
    pub fn ground_count(&self) -> usize {
        self.is_ground.iter().filter(|g| **g).count()
    }
}

#[inline]
fn segment_of(x: f64, y: f64, segments: usize) -> usize {
    let a = (math::atan2(y, x) + PI) / (2.0 * PI);
    ((a * segments as f64) as usize).min(segments - 1)
}

struct Fit {
    slope: f64,
    intercept: f64,
    rmse: f64,
}

fn fit_line(pts: &[(f64, f64)]) -> Fit {
    let n = pts.len() as f64;
    let (mr, mz) = pts.iter().fold((0.0, 0.0), |(a, b), (r, z)| (a + r, b + z));
    let (mr, mz) = (mr / n, mz / n);
    let (mut srr, mut srz) = (0.0, 0.0);
    for (r, z) in pts {
        srr += (r - mr) * (r - mr);
        srz += (r - mr) * (z - mz);
    }
    let slope = if srr > 0.0 { srz / srr } else { 0.0 };
    let intercept = mz - slope * mr;
    let sse: f64 = pts
        .iter()
        .map(|(r, z)| {
            let e = z - (slope * r + intercept);
            e * e
        })
        .sum();
    Fit { slope, intercept, rmse: math::sqrt(sse / n) }
}

fn fit_segment(protos: &[(f64, f64)], params: &GroundParams) -> Vec<GroundLine> {
    let mut lines: Vec<GroundLine> = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();

    let finalize = |pts: &[(f64, f64)], lines: &mut Vec<GroundLine>| {
        if pts.len() < 2 {
            return;
        }
        let fit = fit_line(pts);
        let r_start = pts[0].0;
        // the start must continue the previous line's end point or the base
        // plane, so one polluted line cannot lock out the rest of the segment
        let start_height = fit.slope * r_start + fit.intercept;
        let base = -params.sensor_height;
        let continues = lines.last().is_some_and(|prev| (start_height - prev.height_at(prev.r_end)).abs() <= params.max_step);
        if continues || (start_height - base).abs() <= params.max_step {
            lines.push(GroundLine { slope: fit.slope, intercept: fit.intercept, r_start, r_end: pts[pts.len() - 1].0 });
        }
    };

    for &proto in protos {
        let fits_line = current.len() < 2 || {
            let fit = fit_line(&current);
            (proto.1 - (fit.slope * proto.0 + fit.intercept)).abs() <= params.point_offset
        };
        current.push(proto);
        if current.len() < 2 {
            continue;
        }
        let fit = fit_line(&current);
        if fits_line && fit.rmse <= params.line_rmse && fit.slope.abs() <= params.max_slope {
            continue;
        }
        current.pop();
        finalize(&current, &mut lines);
        current.clear();
        current.push(proto);
    }
    finalize(&current, &mut lines);
    lines
}

/// Labels each merged point of `frame` as ground or not.
pub fn segment_ground(frame: &Frame, params: &GroundParams) -> Result<GroundLabeling, GroundError> {
    params.validate()?;
    if frame.merged_points.is_empty() {
        return Err(GroundError::EmptyInput);
    }
    let n_seg = params.segments;
    let n_bins = params.bins();

    // lowest point per (segment, bin): (z, r, index) with index as tie-break
    let mut lowest: Vec<Option<(f64, f64, usize)>> = vec![None; n_seg * n_bins];
    let mut seg_of_point = Vec::with_capacity(frame.merged_points.len());
    for (i, tp) in frame.merged_points.iter().enumerate() {
        let p = tp.point;
        let r = math::hypot(p.x, p.y);
        if r > params.max_range {
            seg_of_point.push(None);
            continue;
        }
        let seg = segment_of(p.x, p.y, n_seg);
        seg_of_point.push(Some((seg, r)));
        let bin = ((r / params.bin_width) as usize).min(n_bins - 1);
        let slot = &mut lowest[seg * n_bins + bin];
        match slot {
            Some((z, _, _)) if *z <= p.z => {}
            _ => *slot = Some((p.z, r, i)),
        }
    }

    let mut lines = Vec::with_capacity(n_seg);
    let mut protos = Vec::with_capacity(n_bins);
    for seg in 0..n_seg {
        protos.clear();
        protos.extend(lowest[seg * n_bins..(seg + 1) * n_bins].iter().flatten().map(|(z, r, _)| (*r, *z)));
        if protos.len() < 2 {
            lines.push(Vec::new());
        } else {
            lines.push(fit_segment(&protos, params));
        }
    }

    let is_ground = frame
        .merged_points
        .iter()
        .zip(&seg_of_point)
        .map(|(tp, seg)| {
            let Some((seg, r)) = *seg else { return false };
            let z = tp.point.z;
            let model = lines[seg].iter().min_by(|a, b| a.range_gap(r).total_cmp(&b.range_gap(r)));
            let height = match model {
                Some(line) => line.height_at(r),
                None => -params.sensor_height,
            };
            (z - height).abs() <= params.ground_threshold
        })
        .collect();

    Ok(GroundLabeling { is_ground, params: *params, lines })
}
