use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::BevError;
use crate::math;

/// Tolerance for "sums to one" checks on incoming distributions.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Discrete depths `start + k·step` for `k = 1..=count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthBins {
    pub start: f64,
    pub step: f64,
    pub count: usize,
}

impl DepthBins {
    pub fn new(start: f64, step: f64, count: usize) -> Result<Self, BevError> {
        if !(start.is_finite() && step.is_finite() && step > 0.0 && start >= 0.0) || count == 0 {
            return Err(BevError::BadGrid("depth bins need start >= 0, step > 0, count > 0"));
        }
        Ok(Self { start, step, count })
    }

    /// Depth of 1-based bin `k`.
    #[inline]
    pub fn depth(&self, k: usize) -> f64 {
        self.start + k as f64 * self.step
    }

    /// 1-based bin whose depth is nearest to `depth`, if within range.
    pub fn bin_of(&self, depth: f64) -> Option<usize> {
        let k = math::round((depth - self.start) / self.step);
        (k >= 1.0 && k <= self.count as f64).then_some(k as usize)
    }
}

/// Per-pixel distribution over depth bins. Indices exposed to callers are
/// 1-based, matching [`DepthBins::depth`].
#[derive(Debug, Clone, PartialEq)]
pub struct DepthDistribution {
    probs: Vec<f64>,
    /// 1-based bin of the measured depth, when one exists.
    pub gt: Option<usize>,
}

impl DepthDistribution {
    /// Checks non-negativity and unit sum.
    pub fn new(probs: Vec<f64>) -> Result<Self, BevError> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(BevError::NotNormalized(f64::NAN));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(BevError::NotNormalized(sum));
        }
        Ok(Self { probs, gt: None })
    }

    /// Wraps a mass vector without checking the sum (masked distributions).
    pub fn unnormalized(probs: Vec<f64>) -> Self {
        Self { probs, gt: None }
    }

    pub fn one_hot(bins: usize, k: usize) -> Result<Self, BevError> {
        if k == 0 || k > bins {
            return Err(BevError::BadIndex { index: k, bins });
        }
        let mut probs = alloc::vec![0.0; bins];
        probs[k - 1] = 1.0;
        Ok(Self { probs, gt: Some(k) })
    }

    pub fn uniform(bins: usize) -> Self {
        Self { probs: alloc::vec![1.0 / bins as f64; bins], gt: None }
    }

    pub fn with_gt(mut self, gt: Option<usize>) -> Self {
        self.gt = gt;
        self
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// 1-based index of the largest mass. Ties go to the ground-truth bin when
    /// it is among them, otherwise to the lowest index.
    pub fn argmax(&self) -> usize {
        let max = self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if let Some(k) = self.gt {
            if self.probs.get(k - 1) == Some(&max) {
                return k;
            }
        }
        self.probs.iter().position(|p| *p == max).map_or(1, |i| i + 1)
    }
}

/// Sets the mass of bin `k_gt` (1-based) to one and renormalizes.
pub fn merge_depth(est: &DepthDistribution, k_gt: usize) -> Result<DepthDistribution, BevError> {
    let d = est.len();
    if k_gt == 0 || k_gt > d {
        return Err(BevError::BadIndex { index: k_gt, bins: d });
    }
    let mut probs = est.probs.clone();
    probs[k_gt - 1] = 1.0;
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok(DepthDistribution { probs, gt: Some(k_gt) })
}

/// Zeroes each bin independently with probability `r`. The result is not
/// renormalized.
pub fn dropout_mask_with<R: Rng + ?Sized>(est: &DepthDistribution, r: f64, rng: &mut R) -> Result<DepthDistribution, BevError> {
    if !(0.0..=1.0).contains(&r) {
        return Err(BevError::BadFraction(r));
    }
    let probs = est.probs.iter().map(|p| if rng.random::<f64>() < r { 0.0 } else { *p }).collect();
    Ok(DepthDistribution { probs, gt: est.gt })
}

pub fn dropout_mask(est: &DepthDistribution, r: f64, seed: u64) -> Result<DepthDistribution, BevError> {
    dropout_mask_with(est, r, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn one_hot_is_fixed_point() {
        let est = DepthDistribution::one_hot(5, 3).unwrap();
        assert_eq!(merge_depth(&est, 3).unwrap().probs(), est.probs());
    }

    #[test]
    fn merge_two_bins() {
        let est = DepthDistribution::new(vec![0.5, 0.5]).unwrap();
        let m = merge_depth(&est, 1).unwrap();
        assert_eq!(m.probs(), &[2.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn merge_three_bins() {
        let est = DepthDistribution::new(vec![0.2, 0.3, 0.5]).unwrap();
        let m = merge_depth(&est, 2).unwrap();
        let expect = [0.2 / 1.7, 1.0 / 1.7, 0.5 / 1.7];
        for (a, b) in m.probs().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((m.probs()[0] - 0.1176).abs() < 1e-4);
        assert!((m.probs()[1] - 0.5882).abs() < 1e-4);
        assert!((m.probs()[2] - 0.2941).abs() < 1e-4);
        assert_eq!(m.argmax(), 2);
    }

    #[test]
    fn merge_bad_index() {
        let est = DepthDistribution::uniform(4);
        assert_eq!(merge_depth(&est, 0), Err(BevError::BadIndex { index: 0, bins: 4 }));
        assert_eq!(merge_depth(&est, 5), Err(BevError::BadIndex { index: 5, bins: 4 }));
    }

    #[test]
    fn argmax_tie_goes_to_gt() {
        let est = DepthDistribution::one_hot(3, 1).unwrap();
        let m = merge_depth(&est, 3).unwrap();
        assert_eq!(m.probs()[0], m.probs()[2]);
        assert_eq!(m.argmax(), 3);
    }

    #[test]
    fn dropout_extremes() {
        let est = DepthDistribution::uniform(50);
        assert_eq!(dropout_mask(&est, 0.0, 1).unwrap(), est);
        assert!(dropout_mask(&est, 1.0, 1).unwrap().probs().iter().all(|p| *p == 0.0));
        assert_eq!(dropout_mask(&est, 1.5, 1), Err(BevError::BadFraction(1.5)));
    }

    #[test]
    fn dropout_is_reproducible() {
        let est = DepthDistribution::uniform(200);
        let a = dropout_mask(&est, 0.3, 99).unwrap();
        let b = dropout_mask(&est, 0.3, 99).unwrap();
        let bits = |d: &DepthDistribution| d.probs().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(a, dropout_mask(&est, 0.3, 100).unwrap());
    }

    #[test]
    fn bins_lookup() {
        let b = DepthBins::new(1.0, 1.0, 60).unwrap();
        assert_eq!(b.depth(1), 2.0);
        assert_eq!(b.bin_of(2.4), Some(1));
        assert_eq!(b.bin_of(61.0), Some(60));
        assert_eq!(b.bin_of(1.4), None);
        assert_eq!(b.bin_of(62.0), None);
    }
}
