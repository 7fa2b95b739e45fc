//! Track quality against synthetic ground truth.
//!
//! Each frame, predicted entries are matched one-to-one to ground-truth
//! last-sweep centers by minimum total distance, gated at `gate`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use super::GroundTruth;
use crate::assoc::{hungarian, CostMatrix, TrackSet};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScoreParams {
    /// Largest center distance at which an entry counts as its object, meters.
    pub gate: f64,
}

impl Default for ScoreParams {
    fn default() -> Self {
        Self { gate: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrackMetrics {
    pub purity: f64,
    pub recall: f64,
    pub id_switches: usize,
    pub center_rmse: f64,
    /// Predicted entries matched to an object.
    pub matched: usize,
    /// Predicted entries matched to nothing.
    pub false_positives: usize,
    /// Object-frame pairs in the ground truth.
    pub gt_entries: usize,
}

/// Object id matched to every entry of every track, in track/entry order.
pub fn entry_identities(pred: &TrackSet, gt: &GroundTruth, params: &ScoreParams) -> Vec<Vec<Option<(usize, f64)>>> {
    let mut ids: Vec<Vec<Option<(usize, f64)>>> = pred.tracks.iter().map(|t| vec![None; t.entries.len()]).collect();
    let mut per_frame: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for (ti, t) in pred.tracks.iter().enumerate() {
        for (ei, e) in t.entries.iter().enumerate() {
            per_frame.entry(e.frame).or_default().push((ti, ei));
        }
    }
    let pad = 2.0 * params.gate;
    for ft in &gt.frames {
        let Some(entries) = per_frame.get(&ft.frame) else { continue };
        let n = entries.len().max(ft.centers.len());
        let mut cost = vec![pad; n * n];
        let mut dist = vec![f64::INFINITY; entries.len() * ft.centers.len()];
        for (r, &(ti, ei)) in entries.iter().enumerate() {
            let c = pred.tracks[ti].entries[ei].center;
            for (k, oc) in ft.centers.iter().enumerate() {
                let d = math::dist3(c, oc.last);
                dist[r * ft.centers.len() + k] = d;
                if d <= params.gate {
                    cost[r * n + k] = d;
                }
            }
        }
        let Ok(matrix) = CostMatrix::new(n, cost) else { continue };
        let assignment = hungarian(&matrix);
        for (r, &k) in assignment.row_to_col.iter().enumerate() {
            if r < entries.len() && k < ft.centers.len() {
                let d = dist[r * ft.centers.len() + k];
                if d <= params.gate {
                    let (ti, ei) = entries[r];
                    ids[ti][ei] = Some((ft.centers[k].object, d));
                }
            }
        }
    }
    ids
}

/// Purity, recall, id-switches and center error of `pred`.
pub fn score_tracks(pred: &TrackSet, gt: &GroundTruth, params: &ScoreParams) -> TrackMetrics {
    let ids = entry_identities(pred, gt, params);
    let total: usize = ids.iter().map(Vec::len).sum();

    let mut pure = 0;
    let mut matched = 0;
    let mut sq = 0.0;
    for track in &ids {
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for (obj, d) in track.iter().flatten() {
            *votes.entry(*obj).or_default() += 1;
            matched += 1;
            sq += d * d;
        }
        // ties resolve to the smallest object id
        let majority = votes.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(o, _)| *o);
        pure += track.iter().filter(|e| e.map(|(o, _)| o) == majority && majority.is_some()).count();
        if majority.is_none() {
            // a track that never touches an object follows nothing consistently
            pure += track.len();
        }
    }

    // MOT id-switches: per object, count changes of the covering track id
    let mut coverage: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (t, track) in pred.tracks.iter().zip(&ids) {
        for (e, id) in t.entries.iter().zip(track) {
            if let Some((obj, _)) = id {
                coverage.insert((*obj, e.frame), t.id);
            }
        }
    }
    let mut id_switches = 0;
    let mut last: Option<(usize, usize)> = None;
    for (&(obj, _), &track) in &coverage {
        if let Some((prev_obj, prev_track)) = last {
            if prev_obj == obj && prev_track != track {
                id_switches += 1;
            }
        }
        last = Some((obj, track));
    }

    let gt_entries: usize = gt.frames.iter().map(|f| f.centers.len()).sum();
    TrackMetrics {
        purity: if total == 0 { 1.0 } else { pure as f64 / total as f64 },
        recall: if gt_entries == 0 { 1.0 } else { coverage.len() as f64 / gt_entries as f64 },
        id_switches,
        center_rmse: if matched == 0 { 0.0 } else { math::sqrt(sq / matched as f64) },
        matched,
        false_positives: total - matched,
        gt_entries,
    }
}
