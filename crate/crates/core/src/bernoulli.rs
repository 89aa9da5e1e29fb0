// SPDX-License-Identifier: MIT OR Apache-2.0

//! Binary sequences, their recurrence-time representation, and the
//! penalized-likelihood merging search for multiple change points.
//!
//! Time points are 1-based. A change point `tau` is the last time point of
//! the segment it closes, so a segmentation of `N` points with change points
//! `tau_1 < ... < tau_k` has segments `(0, tau_1], (tau_1, tau_2], ..., (tau_k, N]`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A sequence of 0/1 observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinarySeq {
    values: Vec<u8>,
}

impl BinarySeq {
    pub fn new(values: Vec<u8>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSequence("sequence must have at least one element".into()));
        }
        if let Some(pos) = values.iter().position(|&v| v > 1) {
            return Err(Error::InvalidSequence(format!(
                "element {} is {}, expected 0 or 1",
                pos + 1,
                values[pos]
            )));
        }
        Ok(Self { values })
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self> {
        Self::new(bits.into_iter().map(u8::from).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, t: usize) -> u8 {
        self.values[t - 1]
    }

    pub fn count_ones(&self) -> usize {
        self.values.iter().filter(|&&v| v == 1).count()
    }

    /// 1-based positions of the 1's, increasing.
    pub fn one_positions(&self) -> Vec<usize> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(i, _)| i + 1)
            .collect()
    }

    /// `prefix[t]` is the number of 1's among the first `t` elements.
    pub fn prefix_ones(&self) -> Vec<usize> {
        let mut prefix = Vec::with_capacity(self.values.len() + 1);
        prefix.push(0);
        let mut acc = 0;
        for &v in &self.values {
            acc += v as usize;
            prefix.push(acc);
        }
        prefix
    }
}

/// Gaps (number of 0's) between consecutive 1's, including the leading and
/// trailing runs of 0's.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RecurrenceSeq {
    pub times: Vec<usize>,
    pub one_positions: Vec<usize>,
    pub n: usize,
}

impl RecurrenceSeq {
    pub fn ones(&self) -> usize {
        self.one_positions.len()
    }

    /// Rebuilds the originating binary sequence.
    pub fn to_binary(&self) -> BinarySeq {
        let mut values = vec![0u8; self.n];
        for &p in &self.one_positions {
            values[p - 1] = 1;
        }
        BinarySeq { values }
    }
}

pub fn encode_recurrence(seq: &BinarySeq) -> Result<RecurrenceSeq> {
    let ones = seq.one_positions();
    if ones.is_empty() {
        return Err(Error::AllZeros);
    }
    let n = seq.len();
    let mut times = Vec::with_capacity(ones.len() + 1);
    times.push(ones[0] - 1);
    for w in ones.windows(2) {
        times.push(w[1] - w[0] - 1);
    }
    times.push(n - ones[ones.len() - 1]);
    Ok(RecurrenceSeq {
        times,
        one_positions: ones,
        n,
    })
}

/// Penalty coefficient applied per model parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
#[derive(Default)]
pub enum Penalty {
    /// Coefficient 2.
    #[default]
    Aic,
    /// Coefficient `ln N`.
    Bic,
    Custom(f64),
}

impl std::str::FromStr for Penalty {
    type Err = Error;

    /// Accepts `aic`, `bic` or a nonnegative number.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aic" => Ok(Penalty::Aic),
            "bic" => Ok(Penalty::Bic),
            other => match other.parse::<f64>() {
                Ok(v) if v.is_finite() && v >= 0.0 => Ok(Penalty::Custom(v)),
                _ => Err(Error::Config(format!("penalty must be aic, bic or a nonnegative number, got '{s}'"))),
            },
        }
    }
}

impl std::fmt::Display for Penalty {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Penalty::Aic => f.write_str("aic"),
            Penalty::Bic => f.write_str("bic"),
            Penalty::Custom(v) => write!(f, "{v}"),
        }
    }
}

impl TryFrom<String> for Penalty {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Penalty> for String {
    fn from(p: Penalty) -> String {
        p.to_string()
    }
}

impl Penalty {
    pub fn coefficient(self, n: usize) -> f64 {
        match self {
            Penalty::Aic => 2.0,
            Penalty::Bic => (n.max(1) as f64).ln(),
            Penalty::Custom(v) => v,
        }
    }
}


/// Result of segmenting one binary sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmentation<T> {
    pub change_points: Vec<usize>,
    pub rates: Vec<T>,
    pub loss: T,
    pub penalty_coeff: T,
}

impl<T: Scalar> Segmentation<T> {
    pub fn num_segments(&self) -> usize {
        self.change_points.len() + 1
    }
}

pub fn validate_change_points(change_points: &[usize], n: usize) -> Result<()> {
    let mut prev = 0;
    for &cp in change_points {
        if cp == 0 || cp >= n {
            return Err(Error::InvalidChangePoints(format!(
                "change point {cp} is outside (0, {n})"
            )));
        }
        if cp <= prev {
            return Err(Error::InvalidChangePoints(format!(
                "change points must be strictly increasing; {cp} follows {prev}"
            )));
        }
        prev = cp;
    }
    Ok(())
}

/// Segment boundaries `0, tau_1, ..., tau_k, N`.
pub(crate) fn boundaries(change_points: &[usize], n: usize) -> Vec<usize> {
    let mut b = Vec::with_capacity(change_points.len() + 2);
    b.push(0);
    b.extend_from_slice(change_points);
    b.push(n);
    b
}

/// Maximum-likelihood Bernoulli rate of every segment.
pub fn segment_rates<T: Scalar>(seq: &BinarySeq, change_points: &[usize]) -> Result<Vec<T>> {
    validate_change_points(change_points, seq.len())?;
    let prefix = seq.prefix_ones();
    Ok(boundaries(change_points, seq.len())
        .windows(2)
        .map(|w| T::of_usize(prefix[w[1]] - prefix[w[0]]) / T::of_usize(w[1] - w[0]))
        .collect())
}

/// Bernoulli log-likelihood of a segment of `len` points holding `ones` 1's,
/// evaluated at its MLE rate.
fn segment_loglik<T: Scalar>(ones: usize, len: usize) -> T {
    T::of_usize(ones).xlogx() + T::of_usize(len - ones).xlogx() - T::of_usize(len).xlogx()
}

/// Number of free parameters of a `k` change-point model: `k` locations
/// plus `k + 1` rates.
pub fn parameter_count(k: usize) -> usize {
    2 * k + 1
}

/// `-2 * log-likelihood + penalty_coeff * (2k + 1)`.
pub fn penalized_loss<T: Scalar>(seq: &BinarySeq, change_points: &[usize], penalty_coeff: T) -> Result<T> {
    validate_change_points(change_points, seq.len())?;
    let prefix = seq.prefix_ones();
    let ll: T = boundaries(change_points, seq.len())
        .windows(2)
        .map(|w| segment_loglik::<T>(prefix[w[1]] - prefix[w[0]], w[1] - w[0]))
        .sum();
    Ok(-T::of(2.0) * ll + penalty_coeff * T::of_usize(parameter_count(change_points.len())))
}

/// Work counters of one merging search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Recurrence times absorbed into windows, summed over every threshold.
    pub merge_events: usize,
    /// Candidate partitions whose loss was evaluated.
    pub loss_evaluations: usize,
}

/// Minimizes the penalized loss over the partitions generated by merging
/// recurrence times in increasing order, for every count threshold.
pub fn merge_search<T: Scalar>(seq: &BinarySeq, penalty_coeff: T) -> Segmentation<T> {
    merge_search_with_stats(seq, penalty_coeff).0
}

pub fn merge_search_with_stats<T: Scalar>(seq: &BinarySeq, penalty_coeff: T) -> (Segmentation<T>, SearchStats) {
    let n = seq.len();
    let empty = |seq: &BinarySeq| {
        let rates = segment_rates(seq, &[]).expect("empty partition is valid");
        let loss = penalized_loss(seq, &[], penalty_coeff).expect("empty partition is valid");
        Segmentation {
            change_points: Vec::new(),
            rates,
            loss,
            penalty_coeff,
        }
    };

    let rec = match encode_recurrence(seq) {
        Ok(rec) if n >= 2 && rec.ones() < n => rec,
        _ => return (empty(seq), SearchStats::default()),
    };

    let ctx = SweepContext::new(seq, &rec, penalty_coeff);
    let mut stats = SearchStats::default();

    let mut best_loss = ctx.empty_loss();
    let mut best: Option<(usize, usize)> = None;

    for c_star in 0..=rec.ones() {
        let mut sweep = Sweep::new(&ctx, c_star);
        for step in 0..ctx.order.len() {
            stats.merge_events += 1;
            if let Some(loss) = sweep.absorb(ctx.order[step]) {
                stats.loss_evaluations += 1;
                if loss < best_loss {
                    best_loss = loss;
                    best = Some((c_star, step));
                }
            }
        }
    }

    let change_points = match best {
        None => Vec::new(),
        Some((c_star, last_step)) => {
            let mut sweep = Sweep::new(&ctx, c_star);
            for &gap in &ctx.order[..=last_step] {
                sweep.absorb(gap);
            }
            sweep.change_points()
        }
    };

    let rates = segment_rates(seq, &change_points).expect("search emits valid change points");
    let loss = penalized_loss(seq, &change_points, penalty_coeff).expect("search emits valid change points");
    (
        Segmentation {
            change_points,
            rates,
            loss,
            penalty_coeff,
        },
        stats,
    )
}

/// Immutable data shared by every threshold of the sweep.
struct SweepContext<'a, T> {
    n: usize,
    prefix: Vec<usize>,
    ones: &'a [usize],
    /// Gap indices sorted by gap length, ties by position.
    order: Vec<usize>,
    penalty_coeff: T,
}

impl<'a, T: Scalar> SweepContext<'a, T> {
    fn new(seq: &BinarySeq, rec: &'a RecurrenceSeq, penalty_coeff: T) -> Self {
        let mut order: Vec<usize> = (0..rec.times.len()).collect();
        order.sort_by_key(|&i| (rec.times[i], i));
        Self {
            n: seq.len(),
            prefix: seq.prefix_ones(),
            ones: &rec.one_positions,
            order,
            penalty_coeff,
        }
    }

    fn gap_count(&self) -> usize {
        self.ones.len() + 1
    }

    /// Change point before a window whose first gap is `a`: the 1 opening the gap.
    fn left_boundary(&self, a: usize) -> usize {
        if a == 0 {
            0
        } else {
            self.ones[a - 1]
        }
    }

    /// Change point after a window whose last gap is `b`: the 1 closing the gap.
    fn right_boundary(&self, b: usize) -> usize {
        if b + 1 == self.gap_count() {
            self.n
        } else {
            self.ones[b]
        }
    }

    fn interior(&self, boundary: usize) -> usize {
        usize::from(boundary > 0 && boundary < self.n)
    }

    fn window_change_points(&self, a: usize, b: usize) -> usize {
        self.interior(self.left_boundary(a)) + self.interior(self.right_boundary(b))
    }

    /// Log-likelihood of `(bounds[0], bounds[last]]` partitioned at `bounds`.
    fn region_loglik(&self, bounds: &[usize]) -> T {
        bounds
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| segment_loglik::<T>(self.prefix[w[1]] - self.prefix[w[0]], w[1] - w[0]))
            .sum()
    }

    fn loss(&self, loglik: T, k: usize) -> T {
        -T::of(2.0) * loglik + self.penalty_coeff * T::of_usize(parameter_count(k))
    }

    fn empty_loss(&self) -> T {
        self.loss(self.region_loglik(&[0, self.n]), 0)
    }
}

/// State of the merging pass for one count threshold.
struct Sweep<'c, 'a, T> {
    ctx: &'c SweepContext<'a, T>,
    c_star: usize,
    marked: Vec<bool>,
    /// For a window `[a, b]` of marked gaps, `run_end[a] = b` and `run_end[b] = a`.
    run_end: Vec<usize>,
    /// Windows holding more than `c_star` gaps, keyed by first gap.
    qualifying: BTreeMap<usize, usize>,
    loglik: T,
    k: usize,
}

impl<'c, 'a, T: Scalar> Sweep<'c, 'a, T> {
    fn new(ctx: &'c SweepContext<'a, T>, c_star: usize) -> Self {
        let gaps = ctx.gap_count();
        Self {
            ctx,
            c_star,
            marked: vec![false; gaps],
            run_end: (0..gaps).collect(),
            qualifying: BTreeMap::new(),
            loglik: ctx.region_loglik(&[0, ctx.n]),
            k: 0,
        }
    }

    /// Marks gap `i`, merging it with marked neighbours. Returns the loss of
    /// the updated partition when the merged window qualifies.
    fn absorb(&mut self, i: usize) -> Option<T> {
        let gaps = self.ctx.gap_count();
        self.marked[i] = true;
        let mut a = i;
        let mut b = i;
        let mut absorbed: [Option<(usize, usize)>; 2] = [None, None];
        if i > 0 && self.marked[i - 1] {
            a = self.run_end[i - 1];
            absorbed[0] = Some((a, i - 1));
        }
        if i + 1 < gaps && self.marked[i + 1] {
            b = self.run_end[i + 1];
            absorbed[1] = Some((i + 1, b));
        }
        self.run_end[a] = b;
        self.run_end[b] = a;

        if b - a < self.c_star {
            return None;
        }

        let ctx = self.ctx;
        let left_edge = self
            .qualifying
            .range(..a)
            .next_back()
            .map_or(0, |(_, &pb)| ctx.right_boundary(pb));
        let right_edge = self
            .qualifying
            .range(b + 1..)
            .next()
            .map_or(ctx.n, |(&na, _)| ctx.left_boundary(na));

        let mut old_bounds = vec![left_edge];
        for (wa, wb) in absorbed.into_iter().flatten() {
            if self.qualifying.remove(&wa).is_some() {
                old_bounds.push(ctx.left_boundary(wa));
                old_bounds.push(ctx.right_boundary(wb));
                self.k -= ctx.window_change_points(wa, wb);
            }
        }
        old_bounds.push(right_edge);

        let new_bounds = [left_edge, ctx.left_boundary(a), ctx.right_boundary(b), right_edge];
        self.loglik = self.loglik + ctx.region_loglik(&new_bounds) - ctx.region_loglik(&old_bounds);
        self.k += ctx.window_change_points(a, b);
        self.qualifying.insert(a, b);

        Some(ctx.loss(self.loglik, self.k))
    }

    fn change_points(&self) -> Vec<usize> {
        let mut cps = Vec::with_capacity(2 * self.qualifying.len());
        for (&a, &b) in &self.qualifying {
            for boundary in [self.ctx.left_boundary(a), self.ctx.right_boundary(b)] {
                if boundary > 0 && boundary < self.ctx.n {
                    cps.push(boundary);
                }
            }
        }
        cps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(bits: &[u8]) -> BinarySeq {
        BinarySeq::new(bits.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_binary_values() {
        assert!(matches!(BinarySeq::new(vec![0, 2, 1]), Err(Error::InvalidSequence(_))));
        assert!(matches!(BinarySeq::new(vec![]), Err(Error::InvalidSequence(_))));
    }

    #[test]
    fn recurrence_examples() {
        let r = encode_recurrence(&seq(&[1, 0, 0, 1])).unwrap();
        assert_eq!(r.times, vec![0, 2, 0]);
        assert_eq!(r.one_positions, vec![1, 4]);

        let r = encode_recurrence(&seq(&[0, 1, 1, 0])).unwrap();
        assert_eq!(r.times, vec![1, 0, 1]);
        assert_eq!(r.one_positions, vec![2, 3]);

        let r = encode_recurrence(&seq(&[1; 5])).unwrap();
        assert_eq!(r.times, vec![0; 6]);
        assert_eq!(r.one_positions, vec![1, 2, 3, 4, 5]);
        assert_eq!(r.to_binary(), seq(&[1; 5]));
    }

    #[test]
    fn recurrence_of_all_zeros_fails() {
        assert!(matches!(encode_recurrence(&seq(&[0, 0, 0])), Err(Error::AllZeros)));
    }

    #[test]
    fn loss_examples() {
        let l: f64 = penalized_loss(&seq(&[1, 1, 1, 1]), &[], 2.0).unwrap();
        assert_eq!(l, 2.0);
        let l: f64 = penalized_loss(&seq(&[1, 1, 0, 0]), &[2], 2.0).unwrap();
        assert_eq!(l, 6.0);
    }

    #[test]
    fn loss_matches_hand_evaluation() {
        // (1,0,1,0 | 0,0,0,0): rates 1/2 and 0 versus a single rate 1/4.
        let s = seq(&[1, 0, 1, 0, 0, 0, 0, 0]);
        let with_cut: f64 = penalized_loss(&s, &[4], 2.0).unwrap();
        let without: f64 = penalized_loss(&s, &[], 2.0).unwrap();
        let hand_cut = -2.0 * (4.0 * 0.5_f64.ln()) + 2.0 * 3.0;
        let hand_none = -2.0 * (2.0 * 0.25_f64.ln() + 6.0 * 0.75_f64.ln()) + 2.0;
        assert!((with_cut - hand_cut).abs() < 1e-12);
        assert!((without - hand_none).abs() < 1e-12);
        assert!(((with_cut - without) - (hand_cut - hand_none)).abs() < 1e-12);
    }

    #[test]
    fn loss_rejects_bad_change_points() {
        let s = seq(&[1, 0, 1, 0]);
        for bad in [vec![0], vec![4], vec![2, 2], vec![3, 1]] {
            assert!(matches!(
                penalized_loss::<f64>(&s, &bad, 2.0),
                Err(Error::InvalidChangePoints(_))
            ));
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(segment_rates::<f64>(&seq(&[1, 1, 0, 0]), &[2]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(segment_rates::<f64>(&seq(&[1, 0, 1, 0]), &[]).unwrap(), vec![0.5]);
        assert_eq!(
            segment_rates::<f64>(&seq(&[1, 0, 0, 1, 1, 1]), &[3]).unwrap(),
            vec![1.0 / 3.0, 1.0]
        );
        assert!(segment_rates::<f64>(&seq(&[1, 0]), &[5]).is_err());
    }

    #[test]
    fn search_on_degenerate_inputs() {
        let s = merge_search(&seq(&[0; 10]), 2.0_f64);
        assert!(s.change_points.is_empty());
        assert_eq!(s.rates, vec![0.0]);
        assert_eq!(s.loss, 2.0);

        let s = merge_search(&seq(&[1; 7]), 2.0_f64);
        assert!(s.change_points.is_empty());
        assert_eq!(s.loss, 2.0);

        let s = merge_search(&seq(&[1]), 2.0_f64);
        assert!(s.change_points.is_empty());
    }

    #[test]
    fn search_finds_a_dense_block() {
        let mut bits = vec![0u8; 30];
        bits.extend(std::iter::repeat_n(1, 10));
        bits.extend(vec![0u8; 30]);
        let s = merge_search(&seq(&bits), 2.0_f64);
        // The block's first 1 sits at 31; the window convention puts the
        // boundary at that 1, the second at the block's last 1.
        assert_eq!(s.change_points, vec![31, 40]);
        assert_eq!(s.rates.len(), 3);
        assert_eq!(s.rates[2], 0.0);
        assert_eq!(s.rates[1], 1.0);
    }

    #[test]
    fn search_loss_matches_direct_evaluation() {
        let s = seq(&[0, 1, 0, 0, 1, 1, 1, 0, 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0]);
        let out = merge_search(&s, 2.0_f64);
        let direct = penalized_loss(&s, &out.change_points, 2.0).unwrap();
        assert_eq!(out.loss, direct);
        assert!(out.loss <= penalized_loss(&s, &[], 2.0).unwrap());
    }

    #[test]
    fn incremental_loss_tracks_direct_loss() {
        // Every evaluated partition reported by a sweep must agree with a
        // from-scratch evaluation of the same change points.
        let s = seq(&[1, 1, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 1, 1, 0, 1, 0, 0, 1]);
        let rec = encode_recurrence(&s).unwrap();
        let ctx = SweepContext::new(&s, &rec, 2.0_f64);
        for c_star in 0..=rec.ones() {
            let mut sweep = Sweep::new(&ctx, c_star);
            for &gap in &ctx.order {
                if let Some(loss) = sweep.absorb(gap) {
                    let cps = sweep.change_points();
                    let direct = penalized_loss(&s, &cps, 2.0).unwrap();
                    assert!((loss - direct).abs() < 1e-9, "c*={c_star}: {loss} vs {direct}");
                }
            }
        }
    }

    #[test]
    fn work_is_quadratic_in_ones() {
        let bits: Vec<u8> = (0..200).map(|i| u8::from(i % 7 == 0 || i % 11 == 0)).collect();
        let s = seq(&bits);
        let m = s.count_ones();
        let (_, stats) = merge_search_with_stats(&s, 2.0_f64);
        assert_eq!(stats.merge_events, (m + 1) * (m + 1));
        assert!(stats.merge_events <= 4 * m * m);
        assert!(stats.loss_evaluations <= stats.merge_events);
    }

    #[test]
    fn bic_coefficient() {
        assert_eq!(Penalty::Aic.coefficient(100), 2.0);
        assert!((Penalty::Bic.coefficient(100) - 100f64.ln()).abs() < 1e-15);
        assert_eq!(Penalty::Custom(3.5).coefficient(10), 3.5);
    }

    #[test]
    fn generic_over_f32() {
        let s = seq(&[0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        let a = merge_search(&s, 2.0_f32);
        let b = merge_search(&s, 2.0_f64);
        assert_eq!(a.change_points, b.change_points);
    }
}
