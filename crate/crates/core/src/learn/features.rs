use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use super::{LearnError, SamplePlan};
use crate::bev::FeatureMap;
use crate::math;

/// Norms below this cannot be normalized.
pub const DEGENERATE_NORM: f64 = 1e-12;
/// Allowed deviation of a unit vector's norm from 1.
pub const UNIT_TOL: f64 = 1e-6;

pub fn normalize(v: &[f64]) -> Result<Vec<f64>, LearnError> {
    let n = math::l2_norm(v);
    if !(n > DEGENERATE_NORM) {
        return Err(LearnError::NormalizationDegenerate);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

pub fn check_unit(v: &[f64]) -> Result<(), LearnError> {
    let n = math::l2_norm(v);
    if (n - 1.0).abs() > UNIT_TOL || !n.is_finite() {
        return Err(LearnError::NotNormalized(n));
    }
    Ok(())
}

/// Mean of the map sampled at every foreground sample of instance `m`.
pub fn instance_feature(map: &FeatureMap, plan: &SamplePlan, m: usize) -> Result<Vec<f64>, LearnError> {
    let mut acc = vec![0.0; map.channels];
    let mut n = 0usize;
    for s in plan.instance_samples(m) {
        let st = map.grid.stencil(s.x, s.y)?;
        map.accumulate(&st, 1.0, &mut acc);
        n += 1;
    }
    if n == 0 {
        return Err(LearnError::NoSamples(m));
    }
    for v in &mut acc {
        *v /= n as f64;
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BankEntries {
    pub created: usize,
    /// `(frame, raw feature)`, frames strictly increasing.
    pub entries: VecDeque<(usize, Vec<f64>)>,
}

/// Per-track ring buffers of the most recent `history + 1` raw features.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MemoryBank {
    pub history: usize,
    pub banks: BTreeMap<usize, BankEntries>,
}

impl MemoryBank {
    pub fn new(history: usize) -> Self {
        Self { history, banks: BTreeMap::new() }
    }

    pub fn get(&self, track: usize) -> Option<&BankEntries> {
        self.banks.get(&track)
    }

    pub fn len(&self) -> usize {
        self.banks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.banks.is_empty()
    }

    pub fn push(&mut self, track: usize, frame: usize, feature: Vec<f64>) -> Result<(), LearnError> {
        let bank = self.banks.entry(track).or_insert_with(|| BankEntries { created: frame, entries: VecDeque::new() });
        if let Some((last, _)) = bank.entries.back() {
            if frame <= *last {
                return Err(LearnError::FrameOrder { track, last: *last, frame });
            }
        }
        bank.entries.push_back((frame, feature));
        while bank.entries.len() > self.history + 1 {
            bank.entries.pop_front();
        }
        Ok(())
    }

    /// Drops banks whose newest entry is older than `frame - history`.
    pub fn evict_stale(&mut self, frame: usize) {
        let horizon = frame.saturating_sub(self.history);
        self.banks.retain(|_, b| b.entries.back().is_some_and(|(f, _)| *f >= horizon));
    }

    /// Arithmetic mean of the stored raw features of `track`.
    pub fn temporal_mean(&self, track: usize) -> Result<Vec<f64>, LearnError> {
        let bank = self.banks.get(&track).filter(|b| !b.entries.is_empty()).ok_or(LearnError::NoHistory(track))?;
        let c = bank.entries[0].1.len();
        let mut acc = vec![0.0; c];
        for (_, f) in &bank.entries {
            if f.len() != c {
                return Err(LearnError::ShapeMismatch("bank features differ in length"));
            }
            for (a, v) in acc.iter_mut().zip(f) {
                *a += v;
            }
        }
        let n = bank.entries.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }

    /// Unit-normalized temporal mean.
    pub fn temporal_average(&self, track: usize) -> Result<Vec<f64>, LearnError> {
        normalize(&self.temporal_mean(track)?)
    }
}
