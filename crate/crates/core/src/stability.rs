// SPDX-License-Identifier: MIT OR Apache-2.0

//! Stability detection: per-sequence selection sets are turned into
//! selection probabilities for every time point, which are thresholded,
//! binned or smoothed to locate change points when their number is unknown.

use serde::{Deserialize, Serialize};

use crate::bernoulli::{BinarySeq, Segmentation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::weighting::WeightVector;

pub const DEFAULT_PI: f64 = 0.1;
pub const DEFAULT_BINS: usize = 30;

/// Time points selected from one sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SelectionSet {
    /// 1-based, increasing, without duplicates.
    pub members: Vec<usize>,
    pub n: usize,
}

impl SelectionSet {
    pub fn new(mut members: Vec<usize>, n: usize) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.first() == Some(&0) || members.last().is_some_and(|&t| t > n) {
            return Err(Error::InvalidInput(format!("selection set members must lie in 1..={n}")));
        }
        Ok(Self { members, n })
    }

    pub fn contains(&self, t: usize) -> bool {
        self.members.binary_search(&t).is_ok()
    }
}

/// Change points of `seg`, optionally widened to the points between the 1
/// at or before each change point and the next 1 after it.
pub fn selection_set<T: Scalar>(seq: &BinarySeq, seg: &Segmentation<T>, expand: bool) -> SelectionSet {
    let n = seq.len();
    if !expand {
        return SelectionSet {
            members: seg.change_points.clone(),
            n,
        };
    }
    let ones = seq.one_positions();
    let mut members = Vec::new();
    for &cp in &seg.change_points {
        let idx = ones.partition_point(|&o| o <= cp);
        let prev = if idx == 0 { 0 } else { ones[idx - 1] };
        let next = ones.get(idx).copied().unwrap_or(n);
        members.push(cp);
        members.extend((prev + 1..next).filter(|&t| t < n));
    }
    members.sort_unstable();
    members.dedup();
    SelectionSet { members, n }
}

/// Per-time-point selection probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionProfile<T> {
    /// `pi[t - 1]` is the selection probability of time point `t`.
    pub pi: Vec<T>,
    pub v: usize,
    pub weighted: bool,
}

impl<T: Scalar> SelectionProfile<T> {
    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn total_mass(&self) -> T {
        self.pi.iter().copied().sum()
    }

    pub fn at(&self, t: usize) -> T {
        self.pi[t - 1]
    }
}

/// Share of (optionally weighted) votes each time point receives.
pub fn selection_profile<T: Scalar>(
    sets: &[SelectionSet],
    weights: Option<&WeightVector<T>>,
) -> Result<SelectionProfile<T>> {
    let v = sets.len();
    if v == 0 {
        return Err(Error::InvalidInput("selection profile needs at least one set".into()));
    }
    let n = sets[0].n;
    if let Some(s) = sets.iter().find(|s| s.n != n) {
        return Err(Error::DimMismatch(format!("selection sets over N={} and N={}", n, s.n)));
    }
    if let Some(w) = weights {
        if w.len() != v {
            return Err(Error::DimMismatch(format!("{} weights for {} selection sets", w.len(), v)));
        }
    }
    let pi = match weights {
        None => {
            let mut counts = vec![0usize; n];
            for s in sets {
                for &t in &s.members {
                    counts[t - 1] += 1;
                }
            }
            let vv = T::of_usize(v);
            counts.into_iter().map(|c| T::of_usize(c) / vv).collect()
        }
        Some(w) => {
            let mut acc = vec![T::zero(); n];
            for (s, &wj) in sets.iter().zip(w.as_slice()) {
                for &t in &s.members {
                    acc[t - 1] = acc[t - 1] + wj;
                }
            }
            acc.into_iter().map(|x| x.min(T::one())).collect()
        }
    };
    Ok(SelectionProfile {
        pi,
        v,
        weighted: weights.is_some(),
    })
}

/// Time points whose selection probability is at least `pi`.
pub fn threshold_select<T: Scalar>(profile: &SelectionProfile<T>, pi: T) -> Vec<usize> {
    profile
        .pi
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= pi)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Maximal runs of consecutive time points, as inclusive `(start, end)` pairs.
pub fn connected_windows(points: &[usize]) -> Vec<(usize, usize)> {
    let mut windows: Vec<(usize, usize)> = Vec::new();
    for &t in points {
        match windows.last_mut() {
            Some((_, end)) if *end + 1 == t => *end = t,
            _ => windows.push((t, t)),
        }
    }
    windows
}

#[derive(Clone, Debug, PartialEq)]
pub struct BinnedProfile<T> {
    pub width: usize,
    /// Profile mass falling in each bin, in time order.
    pub sums: Vec<T>,
    /// Whether the last bin is shorter than `width`.
    pub last_partial: bool,
}

impl<T: Scalar> BinnedProfile<T> {
    /// Inclusive 1-based time range covered by bin `i` (0-based).
    pub fn range(&self, i: usize, n: usize) -> (usize, usize) {
        (i * self.width + 1, ((i + 1) * self.width).min(n))
    }

    /// Bin indices ordered by decreasing mass, ties by position.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.sums.len()).collect();
        idx.sort_by(|&a, &b| {
            self.sums[b]
                .partial_cmp(&self.sums[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }
}

pub fn bin_profile<T: Scalar>(profile: &SelectionProfile<T>, bin_width: usize) -> Result<BinnedProfile<T>> {
    if bin_width == 0 {
        return Err(Error::Config("bin width must be at least 1".into()));
    }
    let sums = profile.pi.chunks(bin_width).map(|c| c.iter().copied().sum()).collect();
    Ok(BinnedProfile {
        width: bin_width,
        sums,
        last_partial: !profile.len().is_multiple_of(bin_width),
    })
}

/// Bin width giving `bins` bins over `n` points.
pub fn bin_width_for(n: usize, bins: usize) -> usize {
    n.div_ceil(bins.max(1)).max(1)
}

/// `ceil(n / 50)`, bumped to the next odd number.
pub fn default_smooth_window(n: usize) -> usize {
    let w = n.div_ceil(50).max(1);
    if w.is_multiple_of(2) {
        w + 1
    } else {
        w
    }
}

/// Centered moving average; the window shrinks at the edges.
pub fn smooth<T: Scalar>(values: &[T], window: usize) -> Vec<T> {
    let half = window / 2;
    let n = values.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(T::zero());
    for &v in values {
        let last = *prefix.last().expect("non-empty prefix");
        prefix.push(last + v);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / T::of_usize(hi - lo)
        })
        .collect()
}

/// Positive local maxima of `values` (1-based), ranked by height and then
/// position. A plateau counts once, at its leftmost point.
pub fn peaks<T: Scalar>(values: &[T]) -> Vec<usize> {
    let n = values.len();
    let mut found: Vec<(T, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_lower = i == 0 || values[i - 1] < values[i];
        let right_lower = j + 1 == n || values[j + 1] < values[i];
        if left_lower && right_lower && values[i] > T::zero() {
            found.push((values[i], i + 1));
        }
        i = j + 1;
    }
    found.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });
    found.into_iter().map(|(_, t)| t).collect()
}

pub fn local_maxima<T: Scalar>(
    profile: &SelectionProfile<T>,
    smooth_window: usize,
    top_k: Option<usize>,
) -> Result<Vec<usize>> {
    if smooth_window == 0 || smooth_window.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "smoothing window must be odd and positive, got {smooth_window}"
        )));
    }
    let mut found = peaks(&smooth(&profile.pi, smooth_window));
    if let Some(k) = top_k {
        found.truncate(k);
    }
    Ok(found)
}

/// Inputs of the false positive / false negative rate bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundInputs {
    /// Average selection probability of a noise time point.
    pub p_noise: f64,
    /// Average selection probability of an admissive time point.
    pub p_admissive: f64,
    pub xi: f64,
    pub pi_threshold: f64,
    pub v: usize,
}

#[derive(Debug)]
pub struct ErrorBounds {
    /// Bound on the expected share of noise points selected.
    pub fpr: Result<f64>,
    /// Bound on the expected share of admissive points missed.
    pub fnr: Result<f64>,
}

/// Closed-form bounds from Markov's inequality and Chernoff bounds on
/// `V` independent selections. Each bound is evaluated only inside its
/// validity region.
pub fn error_bounds(inputs: &ErrorBoundInputs) -> ErrorBounds {
    let ErrorBoundInputs {
        p_noise,
        p_admissive,
        xi,
        pi_threshold: pi,
        v,
    } = *inputs;
    let v = v as f64;
    let chernoff = |p: f64| (-(xi * xi) * v * p / (xi + 2.0)).exp();

    let fpr = if !(p_noise > 0.0 && p_noise < 1.0) {
        Err(Error::InvalidRegime(format!("noise rate {p_noise} is outside (0, 1)")))
    } else if !(xi > 0.0 && xi < 1.0 / p_noise - 1.0) {
        Err(Error::InvalidRegime(format!(
            "xi={xi} must lie in (0, {}) for the false positive bound",
            1.0 / p_noise - 1.0
        )))
    } else if !(pi > (1.0 + xi) * p_noise) {
        Err(Error::InvalidRegime(format!(
            "threshold {pi} must exceed (1 + xi) * p_noise = {}",
            (1.0 + xi) * p_noise
        )))
    } else {
        let a = (1.0 + xi) * p_noise;
        Ok((1.0 - a) / (pi - a) * chernoff(p_noise))
    };

    let fnr = if !(p_admissive > 0.0 && p_admissive < 1.0) {
        Err(Error::InvalidRegime(format!("admissive rate {p_admissive} is outside (0, 1)")))
    } else if !(xi > 0.0 && xi < 1.0) {
        Err(Error::InvalidRegime(format!(
            "xi={xi} must lie in (0, 1) for the false negative bound"
        )))
    } else if !(pi < (1.0 - xi) * p_admissive) {
        Err(Error::InvalidRegime(format!(
            "threshold {pi} must be below (1 - xi) * p_admissive = {}",
            (1.0 - xi) * p_admissive
        )))
    } else {
        let b = (1.0 - xi) * p_admissive;
        Ok(b / (b - pi) * chernoff(p_admissive))
    };

    ErrorBounds { fpr, fnr }
}

/// Admissive points lie within `w_admissive` of a true change point; noise
/// points are at least `w_noise` away from all of them.
pub fn admissive_and_noise(n: usize, true_cps: &[usize], w_admissive: usize, w_noise: usize) -> (Vec<usize>, Vec<usize>) {
    let dist = |t: usize| true_cps.iter().map(|&c| t.abs_diff(c)).min().unwrap_or(usize::MAX);
    let admissive = (1..=n).filter(|&t| dist(t) < w_admissive).collect();
    let noise = (1..=n).filter(|&t| dist(t) >= w_noise).collect();
    (admissive, noise)
}

/// Empirical `(p_noise, p_admissive)` from a profile and known change points.
pub fn estimate_selection_rates<T: Scalar>(
    profile: &SelectionProfile<T>,
    true_cps: &[usize],
    w_admissive: usize,
    w_noise: usize,
) -> Result<(f64, f64)> {
    let (adm, noise) = admissive_and_noise(profile.len(), true_cps, w_admissive, w_noise);
    if adm.is_empty() || noise.is_empty() {
        return Err(Error::InvalidInput(
            "window widths leave no admissive or no noise time points".into(),
        ));
    }
    let mean = |idx: &[usize]| idx.iter().map(|&t| profile.at(t).as_f64()).sum::<f64>() / idx.len() as f64;
    Ok((mean(&noise), mean(&adm)))
}

/// Default admissive and noise window widths: 2% and 5% of `n`.
pub fn default_windows(n: usize) -> (usize, usize) {
    (
        ((0.02 * n as f64).round() as usize).max(1),
        ((0.05 * n as f64).round() as usize).max(1),
    )
}
