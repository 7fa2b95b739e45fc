//! On-disk formats.
//!
//! A frame directory holds `poses.jsonl` (one record per sweep) and
//! `sweeps/FFFF_SS.chr3`. A sweep file is the magic `CHR3`, a little-endian
//! `u32` point count and then `x, y, z, intensity` as little-endian `f32` per
//! point, in the sweep's own ego frame.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use cohere_core::assoc::{Track, TrackEntry, TrackSet};
use cohere_core::bev::{FeatureMap, GridSpec};
use cohere_core::geom::{compose_frame, Frame, Point3, Pose, Sweep};
use cohere_core::synth::GroundTruth;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SWEEP_MAGIC: &[u8; 4] = b"CHR3";
pub const FEATURE_MAGIC: &[u8; 4] = b"CHRF";
pub const POSES_FILE: &str = "poses.jsonl";
pub const SWEEP_DIR: &str = "sweeps";
pub const TRUTH_FILE: &str = "truth.json";

const HEADER: usize = 8;
const POINT_BYTES: usize = 16;

pub fn sweep_file_name(frame: usize, sweep: usize) -> String {
    format!("{frame:04}_{sweep:02}.chr3")
}

pub fn encode_sweep(points: &[Point3]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + POINT_BYTES * points.len());
    out.extend_from_slice(SWEEP_MAGIC);
    out.extend_from_slice(&(points.len() as u32).to_le_bytes());
    for p in points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

fn f32_at(bytes: &[u8], at: usize) -> f32 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_sweep(bytes: &[u8], path: &Path) -> Result<Vec<Point3>> {
    if bytes.len() < HEADER {
        return Err(Error::parse(path, bytes.len(), "truncated header"));
    }
    if &bytes[..4] != SWEEP_MAGIC {
        return Err(Error::parse(path, 0, "bad magic, expected CHR3"));
    }
    let count = u32_at(bytes, 4) as usize;
    let expected = HEADER + count * POINT_BYTES;
    if bytes.len() < expected {
        let complete = (bytes.len() - HEADER) / POINT_BYTES;
        return Err(Error::parse(path, HEADER + complete * POINT_BYTES, format!("truncated point {complete} of {count}")));
    }
    if bytes.len() > expected {
        return Err(Error::parse(path, expected, "trailing bytes after the last point"));
    }
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let at = HEADER + i * POINT_BYTES;
        let mut v = [0.0f64; 4];
        for (k, slot) in v.iter_mut().enumerate() {
            let x = f32_at(bytes, at + 4 * k);
            if !x.is_finite() {
                return Err(Error::parse(path, at + 4 * k, format!("non-finite value in point {i}")));
            }
            *slot = f64::from(x);
        }
        points.push(Point3 { x: v[0], y: v[1], z: v[2], intensity: v[3] });
    }
    Ok(points)
}

/// One sweep of the poses manifest. `q` is `[w, x, y, z]`; the pose maps
/// sweep ego coordinates to world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseRecord {
    pub frame: usize,
    pub sweep: usize,
    pub t: f64,
    pub q: [f64; 4],
    pub p: [f64; 3],
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(Error::io(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(Error::io(parent))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

fn text(bytes: Vec<u8>, path: &Path) -> Result<String> {
    String::from_utf8(bytes).map_err(|e| Error::parse(path, e.utf8_error().valid_up_to(), "invalid UTF-8"))
}

pub fn read_text(path: &Path) -> Result<String> {
    text(read_file(path)?, path)
}

/// Byte offset of a serde_json error inside `text`.
fn json_offset(text: &str, err: &serde_json::Error) -> usize {
    let line_start: usize = text.split_inclusive('\n').take(err.line().saturating_sub(1)).map(str::len).sum();
    (line_start + err.column().saturating_sub(1)).min(text.len())
}

pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::parse(path, json_offset(text, &e), e.to_string()))
}

/// Parses one record per non-blank line.
pub fn parse_json_lines<T: DeserializeOwned>(text: &str, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let body = line.trim_end_matches(['\n', '\r']);
        if !body.trim().is_empty() {
            let record =
                serde_json::from_str(body).map_err(|e| Error::parse(path, offset + json_offset(body, &e), e.to_string()))?;
            out.push(record);
        }
        offset += line.len();
    }
    Ok(out)
}

pub fn to_json_lines<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        Error::parse(path, offset, e.message().to_string())
    })
}

/// Writes the sweeps of `frames` and their poses manifest into `dir`.
pub fn write_frames(dir: &Path, frames: &[Frame]) -> Result<()> {
    let mut poses = Vec::new();
    for frame in frames {
        for (k, sweep) in frame.sweeps.iter().enumerate() {
            let path = dir.join(SWEEP_DIR).join(sweep_file_name(frame.index, k));
            write_file(&path, &encode_sweep(&sweep.points))?;
            poses.push(PoseRecord {
                frame: frame.index,
                sweep: k,
                t: sweep.timestamp,
                q: sweep.pose.quaternion(),
                p: sweep.pose.translation(),
            });
        }
    }
    write_file(&dir.join(POSES_FILE), to_json_lines(&poses).as_bytes())
}

/// Reads every frame listed in the poses manifest of `dir`, in frame order.
pub fn read_frames(dir: &Path) -> Result<Vec<Frame>> {
    let manifest = dir.join(POSES_FILE);
    if !manifest.is_file() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    let records: Vec<PoseRecord> = parse_json_lines(&read_text(&manifest)?, &manifest)?;
    if records.is_empty() {
        return Err(Error::NoFrames(dir.to_path_buf()));
    }
    let mut by_frame: BTreeMap<usize, BTreeMap<usize, PoseRecord>> = BTreeMap::new();
    for r in records {
        if by_frame.entry(r.frame).or_default().insert(r.sweep, r).is_some() {
            return Err(Error::Check(format!("{}: frame {} lists sweep {} twice", manifest.display(), r.frame, r.sweep)));
        }
    }
    let jobs: Vec<(usize, Vec<PoseRecord>)> = by_frame.into_iter().map(|(f, s)| (f, s.into_values().collect())).collect();
    jobs.into_par_iter()
        .map(|(index, sweeps)| {
            if sweeps.iter().enumerate().any(|(k, r)| r.sweep != k) {
                return Err(Error::Check(format!("{}: sweeps of frame {index} are not numbered from 0", manifest.display())));
            }
            let sweeps = sweeps
                .iter()
                .map(|r| {
                    let path: PathBuf = dir.join(SWEEP_DIR).join(sweep_file_name(index, r.sweep));
                    let points = decode_sweep(&read_file(&path)?, &path)?;
                    Ok(Sweep { timestamp: r.t, points, pose: Pose::from_quaternion(r.q, r.p)? })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(compose_frame(index, sweeps)?)
        })
        .collect()
}

/// One track per line: id and `[frame, cluster, cx, cy, cz]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    pub track_id: usize,
    pub entries: Vec<(usize, usize, f64, f64, f64)>,
}

pub fn track_records(tracks: &TrackSet) -> Vec<TrackRecord> {
    tracks
        .tracks
        .iter()
        .map(|t| TrackRecord {
            track_id: t.id,
            entries: t.entries.iter().map(|e| (e.frame, e.cluster, e.center[0], e.center[1], e.center[2])).collect(),
        })
        .collect()
}

pub fn read_tracks(path: &Path, history: usize) -> Result<TrackSet> {
    let records: Vec<TrackRecord> = parse_json_lines(&read_text(path)?, path)?;
    let tracks = records
        .into_iter()
        .map(|r| Track {
            id: r.track_id,
            entries: r
                .entries
                .into_iter()
                .map(|(frame, cluster, x, y, z)| TrackEntry { frame, cluster, center: [x, y, z] })
                .collect(),
            alive: false,
        })
        .collect();
    Ok(TrackSet { tracks, history })
}

pub fn read_truth(path: &Path) -> Result<GroundTruth> {
    parse_json(&read_text(path)?, path)
}

/// Shortest decimal of an `f32`, read back as `f64`.
fn widen(x: f32) -> f64 {
    x.to_string().parse().expect("f32 display parses")
}

/// Magic `CHRF`, then `H, W, C` as `u32`, half extent and cell size as `f32`,
/// then the row-major `f32` payload. Only square grids centered on the
/// origin are representable.
pub fn encode_feature_map(map: &FeatureMap) -> Result<Vec<u8>> {
    let g = map.grid;
    if !(g.x_min == -g.x_max && g.y_min == -g.y_max && g.x_max == g.y_max) {
        return Err(Error::Check("feature map grid is not square and centered".into()));
    }
    let mut out = Vec::with_capacity(24 + 4 * map.data().len());
    out.extend_from_slice(FEATURE_MAGIC);
    for v in [g.height, g.width, map.channels] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&(g.x_max as f32).to_le_bytes());
    out.extend_from_slice(&(g.cell as f32).to_le_bytes());
    for v in map.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature_map(bytes: &[u8], path: &Path) -> Result<FeatureMap> {
    const FM_HEADER: usize = 24;
    if bytes.len() < FM_HEADER {
        return Err(Error::parse(path, bytes.len(), "truncated header"));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(Error::parse(path, 0, "bad magic, expected CHRF"));
    }
    let (h, w, c) = (u32_at(bytes, 4) as usize, u32_at(bytes, 8) as usize, u32_at(bytes, 12) as usize);
    let (extent, cell) = (widen(f32_at(bytes, 16)), widen(f32_at(bytes, 20)));
    let grid = GridSpec::new(-extent, extent, -extent, extent, cell).map_err(|e| Error::parse(path, 16, e.to_string()))?;
    if grid.height != h || grid.width != w {
        return Err(Error::parse(path, 4, "grid size disagrees with extent and cell"));
    }
    let expected = FM_HEADER + 4 * h * w * c;
    if bytes.len() != expected {
        return Err(Error::parse(path, bytes.len().min(expected), format!("payload should end at byte {expected}")));
    }
    let data = (0..h * w * c).map(|i| f64::from(f32_at(bytes, FM_HEADER + 4 * i))).collect();
    Ok(FeatureMap::from_data(grid, c, data)?)
}
