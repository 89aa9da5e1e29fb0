// SPDX-License-Identifier: MIT OR Apache-2.0

//! Aggregation of per-sequence segmentations.
//!
//! Every encoded sequence contributes one column of piecewise-constant
//! estimated rates. Change points shared across columns are recovered by
//! minimizing the within-group variance of the rows, using agglomerative
//! clustering that only merges temporally adjacent clusters.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::bernoulli::{boundaries, validate_change_points, Segmentation};
use crate::encoder::EncodedBundle;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `N x V` matrix of estimated rates, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix<T> {
    n: usize,
    v: usize,
    values: Vec<T>,
}

impl<T: Scalar> RateMatrix<T> {
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let v = columns.len();
        let n = columns.first().map_or(0, Vec::len);
        if v == 0 || n == 0 {
            return Err(Error::InvalidInput("rate matrix needs at least one row and column".into()));
        }
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: c.len(),
            });
        }
        let mut values = Vec::with_capacity(n * v);
        for t in 0..n {
            values.extend(columns.iter().map(|c| c[t]));
        }
        Ok(Self { n, v, values })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let v = rows.first().map_or(0, Vec::len);
        if v == 0 || n == 0 {
            return Err(Error::InvalidInput("rate matrix needs at least one row and column".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.len() != v) {
            return Err(Error::LengthMismatch {
                expected: v,
                found: r.len(),
            });
        }
        Ok(Self {
            n,
            v,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.v
    }

    /// Row `t`, 1-based.
    pub fn row(&self, t: usize) -> &[T] {
        &self.values[(t - 1) * self.v..t * self.v]
    }

    pub fn get(&self, t: usize, j: usize) -> T {
        self.values[(t - 1) * self.v + j]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.n).map(|i| self.values[i * self.v + j]).collect()
    }

    /// Scales column `j` by `factors[j]`.
    pub fn scale_columns(&self, factors: &[T]) -> Result<Self> {
        if factors.len() != self.v {
            return Err(Error::DimMismatch(format!(
                "{} column factors for a matrix with {} columns",
                factors.len(),
                self.v
            )));
        }
        let values = self
            .values
            .chunks_exact(self.v)
            .flat_map(|row| row.iter().zip(factors).map(|(&x, &w)| x * w))
            .collect();
        Ok(Self {
            n: self.n,
            v: self.v,
            values,
        })
    }
}

/// Column of per-time-point rates implied by a segmentation of `n` points.
pub fn rate_column<T: Scalar>(seg: &Segmentation<T>, n: usize) -> Result<Vec<T>> {
    validate_change_points(&seg.change_points, n)?;
    if seg.rates.len() != seg.change_points.len() + 1 {
        return Err(Error::LengthMismatch {
            expected: seg.change_points.len() + 1,
            found: seg.rates.len(),
        });
    }
    let mut col = Vec::with_capacity(n);
    for (w, &rate) in boundaries(&seg.change_points, n).windows(2).zip(&seg.rates) {
        col.extend(std::iter::repeat_n(rate, w[1] - w[0]));
    }
    Ok(col)
}

pub fn build_rate_matrix<T: Scalar>(bundle: &EncodedBundle<T>, segmentations: &[Segmentation<T>]) -> Result<RateMatrix<T>> {
    if bundle.len() != segmentations.len() {
        return Err(Error::LengthMismatch {
            expected: bundle.len(),
            found: segmentations.len(),
        });
    }
    let n = bundle.series_len();
    let columns = segmentations
        .iter()
        .map(|s| rate_column(s, n))
        .collect::<Result<Vec<_>>>()?;
    RateMatrix::from_columns(&columns)
}

/// Sum over segments of the squared deviations of the rows from the segment
/// mean, each segment's total divided by the segment length.
pub fn g_statistic<T: Scalar>(matrix: &RateMatrix<T>, change_points: &[usize]) -> Result<T> {
    validate_change_points(change_points, matrix.rows())?;
    let v = matrix.cols();
    let mut total = T::zero();
    for w in boundaries(change_points, matrix.rows()).windows(2) {
        let len = T::of_usize(w[1] - w[0]);
        let mut mean = vec![T::zero(); v];
        for t in w[0] + 1..=w[1] {
            for (m, &x) in mean.iter_mut().zip(matrix.row(t)) {
                *m = *m + x;
            }
        }
        for m in &mut mean {
            *m = *m / len;
        }
        let ss: T = (w[0] + 1..=w[1])
            .map(|t| {
                matrix
                    .row(t)
                    .iter()
                    .zip(&mean)
                    .map(|(&x, &m)| (x - m) * (x - m))
                    .sum::<T>()
            })
            .sum();
        total = total + ss / len;
    }
    Ok(total)
}

/// One agglomeration step of the contiguity-constrained clustering.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeStep<T> {
    /// First time point of the left cluster.
    pub left_start: usize,
    /// First time point of the right cluster.
    pub right_start: usize,
    /// Last time point of the right cluster.
    pub right_end: usize,
    /// Increase of the within-cluster sum of squares.
    pub cost: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiCpResult<T> {
    pub change_points: Vec<usize>,
    pub g_value: T,
    pub merges: Vec<MergeStep<T>>,
}

struct Candidate<T> {
    cost: T,
    left: usize,
    right: usize,
    left_version: u32,
    right_version: u32,
}

impl<T: Scalar> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl<T: Scalar> Eq for Candidate<T> {}

impl<T: Scalar> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so the max-heap pops the cheapest, then leftmost, pair.
impl<T: Scalar> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.left.cmp(&self.left))
    }
}

struct Cluster<T> {
    end: usize,
    size: usize,
    sum: Vec<T>,
    prev: Option<usize>,
    next: Option<usize>,
    version: u32,
    alive: bool,
}

fn ward_cost<T: Scalar>(a: &Cluster<T>, b: &Cluster<T>) -> T {
    let (na, nb) = (T::of_usize(a.size), T::of_usize(b.size));
    let d: T = a
        .sum
        .iter()
        .zip(&b.sum)
        .map(|(&sa, &sb)| {
            let diff = sa / na - sb / nb;
            diff * diff
        })
        .sum();
    na * nb / (na + nb) * d
}

/// Ward agglomeration restricted to temporally adjacent clusters, stopped at
/// `k + 1` clusters. Returns the `k` cluster boundaries.
pub fn constrained_hclust<T: Scalar>(matrix: &RateMatrix<T>, k: usize) -> Result<MultiCpResult<T>> {
    let n = matrix.rows();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }

    // Clusters are keyed by their first time point (0-based here).
    let mut clusters: Vec<Cluster<T>> = (0..n)
        .map(|i| Cluster {
            end: i,
            size: 1,
            sum: matrix.row(i + 1).to_vec(),
            prev: i.checked_sub(1),
            next: (i + 1 < n).then_some(i + 1),
            version: 0,
            alive: true,
        })
        .collect();

    let initial: Vec<Candidate<T>> = (0..n - 1)
        .into_par_iter()
        .map(|i| Candidate {
            cost: ward_cost(&clusters[i], &clusters[i + 1]),
            left: i,
            right: i + 1,
            left_version: 0,
            right_version: 0,
        })
        .collect();
    let mut heap = BinaryHeap::from(initial);

    let mut merges = Vec::with_capacity(n - 1 - k);
    let mut remaining = n;
    while remaining > k + 1 {
        let cand = heap.pop().expect("adjacent pairs remain while clusters > 1");
        let (l, r) = (cand.left, cand.right);
        if !clusters[l].alive
            || !clusters[r].alive
            || clusters[l].version != cand.left_version
            || clusters[r].version != cand.right_version
        {
            continue;
        }

        let right = std::mem::replace(
            &mut clusters[r],
            Cluster {
                end: 0,
                size: 0,
                sum: Vec::new(),
                prev: None,
                next: None,
                version: 0,
                alive: false,
            },
        );
        let left = &mut clusters[l];
        left.end = right.end;
        left.size += right.size;
        for (s, &x) in left.sum.iter_mut().zip(&right.sum) {
            *s = *s + x;
        }
        left.next = right.next;
        left.version += 1;
        let prev = left.prev;
        let next = left.next;
        if let Some(nx) = next {
            clusters[nx].prev = Some(l);
        }

        merges.push(MergeStep {
            left_start: l + 1,
            right_start: r + 1,
            right_end: right.end + 1,
            cost: cand.cost,
        });
        remaining -= 1;

        if let Some(p) = prev {
            heap.push(Candidate {
                cost: ward_cost(&clusters[p], &clusters[l]),
                left: p,
                right: l,
                left_version: clusters[p].version,
                right_version: clusters[l].version,
            });
        }
        if let Some(nx) = next {
            heap.push(Candidate {
                cost: ward_cost(&clusters[l], &clusters[nx]),
                left: l,
                right: nx,
                left_version: clusters[l].version,
                right_version: clusters[nx].version,
            });
        }
    }

    let mut change_points = Vec::with_capacity(k);
    let mut cur = Some(0);
    while let Some(c) = cur {
        let cl = &clusters[c];
        if cl.next.is_some() {
            change_points.push(cl.end + 1);
        }
        cur = cl.next;
    }

    let g_value = g_statistic(matrix, &change_points)?;
    Ok(MultiCpResult {
        change_points,
        g_value,
        merges,
    })
}

/// Maximally selected two-sample chi-square scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareScan<T> {
    pub tau: usize,
    pub statistic: T,
    /// Number of sequences that contribute (both outcomes present).
    pub degrees_of_freedom: usize,
}

pub const DEFAULT_TRIM: f64 = 0.05;

/// Two-sample Pearson chi-square at split `tau`, summed over sequences.
/// Each sequence contributes the 2x2 table (before/after) x (1/0).
pub fn chisq_at<T: Scalar>(prefixes: &[Vec<usize>], tau: usize) -> T {
    let n = prefixes[0].len() - 1;
    let (n1, n2) = (T::of_usize(tau), T::of_usize(n - tau));
    let nn = T::of_usize(n);
    prefixes
        .iter()
        .filter(|p| p[n] > 0 && p[n] < n)
        .map(|p| {
            let m = p[n];
            let c1 = T::of_usize(p[tau]);
            let c2 = T::of_usize(m - p[tau]);
            let num = c1 * (n2 - c2) - c2 * (n1 - c1);
            nn * num * num / (n1 * n2 * T::of_usize(m) * T::of_usize(n - m))
        })
        .sum()
}

pub fn max_chisq_scan<T: Scalar>(bundle: &EncodedBundle<T>, trim: f64) -> Result<ChiSquareScan<T>> {
    if bundle.is_empty() {
        return Err(Error::InvalidInput("chi-square scan needs at least one sequence".into()));
    }
    if !(0.0..0.5).contains(&trim) {
        return Err(Error::Config(format!("trim must lie in [0, 0.5), got {trim}")));
    }
    let n = bundle.series_len();
    let cut = (trim * n as f64).ceil() as usize;
    let lo = cut.max(1);
    let hi = (n - cut.min(n)).min(n - 1);
    if lo > hi {
        return Err(Error::InvalidInput(format!("no candidate split for N={n} with trim {trim}")));
    }
    let prefixes: Vec<Vec<usize>> = bundle.sequences.iter().map(|s| s.prefix_ones()).collect();
    let df = prefixes.iter().filter(|p| p[n] > 0 && p[n] < n).count();
    if df == 0 {
        return Err(Error::DegenerateCounts);
    }
    let stats: Vec<T> = (lo..=hi).into_par_iter().map(|tau| chisq_at(&prefixes, tau)).collect();
    let (best, stat) = stats
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc });
    Ok(ChiSquareScan {
        tau: lo + best,
        statistic: stat,
        degrees_of_freedom: df,
    })
}
