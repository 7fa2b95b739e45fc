//! Long-term tracks built by chaining frame-to-frame matches.
//!
//! A missed match ends a track for good; an instance that reappears later
//! starts a new track.

use alloc::vec::Vec;

use super::{match_frames, AssocError, AssocParams, FrameMatching, FrameObservation};
use crate::math::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackEntry {
    pub frame: usize,
    pub cluster: usize,
    /// Last-scan center of the cluster in world coordinates.
    pub center: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    pub entries: Vec<TrackEntry>,
    pub alive: bool,
}

impl Track {
    pub fn birth(&self) -> usize {
        self.entries[0].frame
    }

    pub fn last_frame(&self) -> usize {
        self.entries[self.entries.len() - 1].frame
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The most recent `history + 1` entries.
    pub fn window(&self, history: usize) -> &[TrackEntry] {
        let keep = (history + 1).min(self.entries.len());
        &self.entries[self.entries.len() - keep..]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    pub tracks: Vec<Track>,
    pub history: usize,
}

impl TrackSet {
    /// Track id of `cluster` at `frame`, if any.
    pub fn track_of(&self, frame: usize, cluster: usize) -> Option<usize> {
        self.tracks.iter().find(|t| t.entries.iter().any(|e| e.frame == frame && e.cluster == cluster)).map(|t| t.id)
    }

    /// For every frame index below `frames`, the track id of each cluster id
    /// appearing in that frame, sorted by cluster.
    pub fn by_frame(&self, frames: usize) -> Vec<Vec<(usize, usize)>> {
        let mut out: Vec<Vec<(usize, usize)>> = (0..frames).map(|_| Vec::new()).collect();
        for t in &self.tracks {
            for e in &t.entries {
                if e.frame < frames {
                    out[e.frame].push((e.cluster, t.id));
                }
            }
        }
        for f in &mut out {
            f.sort_unstable();
        }
        out
    }
}

/// Streaming track assembly: feed frames in temporal order.
#[derive(Debug, Clone)]
pub struct TrackBuilder {
    params: AssocParams,
    tracks: Vec<Track>,
    prev: Option<FrameObservation>,
    /// Track index of each cluster of `prev`.
    prev_tracks: Vec<usize>,
}

impl TrackBuilder {
    pub fn new(params: AssocParams) -> Result<Self, AssocError> {
        params.validate()?;
        Ok(Self { params, tracks: Vec::new(), prev: None, prev_tracks: Vec::new() })
    }

    /// Adds the next frame and returns how its instances linked to the previous one.
    pub fn push(&mut self, obs: FrameObservation) -> Result<FrameMatching, AssocError> {
        let matching = match &self.prev {
            Some(prev) => {
                if obs.frame <= prev.frame {
                    return Err(AssocError::FrameOrder { prev: prev.frame, curr: obs.frame });
                }
                match_frames(prev, &obs, &self.params)?
            }
            None => FrameMatching { births: (0..obs.len()).collect(), ..Default::default() },
        };

        let entry = |cluster: usize| TrackEntry { frame: obs.frame, cluster, center: obs.pose.apply(obs.last_centers[cluster]) };
        let mut curr_tracks = alloc::vec![usize::MAX; obs.len()];
        for m in &matching.matches {
            let t = self.prev_tracks[m.prev];
            self.tracks[t].entries.push(entry(m.curr));
            curr_tracks[m.curr] = t;
        }
        for &d in &matching.deaths {
            let t = self.prev_tracks[d];
            self.tracks[t].alive = false;
        }
        for &b in &matching.births {
            let id = self.tracks.len();
            self.tracks.push(Track { id, entries: alloc::vec![entry(b)], alive: true });
            curr_tracks[b] = id;
        }
        self.prev_tracks = curr_tracks;
        self.prev = Some(obs);
        Ok(matching)
    }

    /// Track id of each cluster of the most recent frame.
    pub fn current_tracks(&self) -> &[usize] {
        &self.prev_tracks
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn finish(self) -> TrackSet {
        TrackSet { tracks: self.tracks, history: self.params.history }
    }
}

/// Batch form of [`TrackBuilder`].
pub fn assemble_tracks<I>(frames: I, params: &AssocParams) -> Result<TrackSet, AssocError>
where
    I: IntoIterator<Item = FrameObservation>,
{
    let mut builder = TrackBuilder::new(*params)?;
    for obs in frames {
        builder.push(obs)?;
    }
    Ok(builder.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Pose;
    use alloc::vec;

    fn obs(frame: usize, centers: &[Vec3]) -> FrameObservation {
        FrameObservation { frame, pose: Pose::identity(), first_centers: centers.to_vec(), last_centers: centers.to_vec() }
    }

    #[test]
    fn full_window_of_seventeen() {
        let frames = (0..17).map(|f| obs(f, &[[5.0, 0.0, 0.0]]));
        let ts = assemble_tracks(frames, &AssocParams::default()).unwrap();
        assert_eq!(ts.tracks.len(), 1);
        let t = &ts.tracks[0];
        assert_eq!(t.window(16).len(), 17);
        assert_eq!(t.window(16)[0].frame, 0);
        assert_eq!(t.last_frame(), 16);
    }

    #[test]
    fn window_keeps_latest_frames() {
        let frames = (0..20).map(|f| obs(f, &[[5.0, 0.0, 0.0]]));
        let ts = assemble_tracks(frames, &AssocParams::default()).unwrap();
        let w = ts.tracks[0].window(16);
        assert_eq!(w.len(), 17);
        assert_eq!(w[0].frame, 3);
    }

    #[test]
    fn gap_starts_a_new_track() {
        let mut frames = Vec::new();
        for f in 0..10 {
            let present = !(5..7).contains(&f);
            frames.push(obs(f, if present { &[[5.0, 0.0, 0.0]] } else { &[] }));
        }
        let ts = assemble_tracks(frames, &AssocParams::default()).unwrap();
        assert_eq!(ts.tracks.len(), 2);
        assert_eq!(ts.tracks[0].entries.len(), 5);
        assert!(!ts.tracks[0].alive);
        assert_eq!(ts.tracks[1].birth(), 7);
        assert!(ts.tracks[1].alive);
    }

    #[test]
    fn rejects_out_of_order_frames() {
        let mut b = TrackBuilder::new(AssocParams::default()).unwrap();
        b.push(obs(3, &[])).unwrap();
        assert_eq!(b.push(obs(3, &[])), Err(AssocError::FrameOrder { prev: 3, curr: 3 }));
    }

    #[test]
    fn by_frame_lookup() {
        let frames = vec![obs(0, &[[0.0; 3], [9.0, 0.0, 0.0]]), obs(1, &[[9.1, 0.0, 0.0], [0.1, 0.0, 0.0]])];
        let ts = assemble_tracks(frames, &AssocParams::default()).unwrap();
        let bf = ts.by_frame(2);
        assert_eq!(bf[0], vec![(0, 0), (1, 1)]);
        assert_eq!(bf[1], vec![(0, 1), (1, 0)]);
        assert_eq!(ts.track_of(1, 1), Some(0));
    }
}
