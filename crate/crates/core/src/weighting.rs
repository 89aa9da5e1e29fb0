// SPDX-License-Identifier: MIT OR Apache-2.0

//! Relevance weights for the encoded sequences.

use rayon::prelude::*;

use crate::aggregation::{constrained_hclust, MultiCpResult, RateMatrix};
use crate::encoder::EncodedBundle;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_MAX_ITER: usize = 150;
/// Consecutive unchanged iterations required to declare convergence.
pub const STABLE_ITERATIONS: usize = 10;
pub const CHANGE_TOLERANCE: f64 = 1e-6;

/// Nonnegative weights summing to one.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Scalar> WeightVector<T> {
    pub fn new(w: Vec<T>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::InvalidInput("weight vector is empty".into()));
        }
        if w.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidInput("weights must be finite and nonnegative".into()));
        }
        let total: T = w.iter().copied().sum();
        if (total - T::one()).abs() > Self::tolerance(w.len()) {
            return Err(Error::InvalidInput(format!("weights sum to {total}, expected 1")));
        }
        Ok(Self(w))
    }

    pub fn uniform(v: usize) -> Self {
        Self(vec![T::one() / T::of_usize(v.max(1)); v.max(1)])
    }

    /// Normalizes nonnegative scores; all-zero scores give uniform weights.
    pub fn normalized(scores: &[T]) -> Self {
        let total: T = scores.iter().copied().sum();
        if total > T::zero() {
            Self(scores.iter().map(|&s| s / total).collect())
        } else {
            Self::uniform(scores.len())
        }
    }

    /// Accepted deviation of the sum from 1.
    pub fn tolerance(v: usize) -> T {
        T::of(1e-9).max(T::epsilon() * T::of_usize(4 * v.max(1)))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// `1 - (x - min) / (max - min)`; a constant input maps to all ones.
pub fn scale_map<T: Scalar>(x: &[T]) -> Vec<T> {
    let (lo, hi) = x
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    if !(range > T::zero()) {
        return vec![T::one(); x.len()];
    }
    x.iter().map(|&v| T::one() - (v - lo) / range).collect()
}

/// Lower loss, higher weight.
pub fn simple_weights<T: Scalar>(losses: &[T]) -> Result<WeightVector<T>> {
    if losses.is_empty() {
        return Err(Error::InvalidInput("no losses to weight".into()));
    }
    Ok(WeightVector::normalized(&scale_map(losses)))
}

pub fn apply_weights<T: Scalar>(matrix: &RateMatrix<T>, w: &WeightVector<T>) -> Result<RateMatrix<T>> {
    matrix.scale_columns(w.as_slice())
}

/// Shannon entropy (natural log) of how `members` spread over the segments
/// defined by `change_points`.
pub fn membership_entropy<T: Scalar>(members: &[usize], change_points: &[usize]) -> T {
    if members.is_empty() {
        return T::zero();
    }
    let mut counts = vec![0usize; change_points.len() + 1];
    for &t in members {
        counts[change_points.partition_point(|&cp| cp < t)] += 1;
    }
    let total = T::of_usize(members.len());
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = T::of_usize(c) / total;
            p * p.ln()
        })
        .sum::<T>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterativeWeights<T> {
    pub weights: WeightVector<T>,
    pub result: MultiCpResult<T>,
    pub iterations: usize,
    pub converged: bool,
}

/// One smoothing update: half the current weights plus half the
/// normalized entropy scores of the segmentation in `change_points`.
pub fn entropy_update<T: Scalar>(
    current: &WeightVector<T>,
    bundle: &EncodedBundle<T>,
    change_points: &[usize],
) -> WeightVector<T> {
    let entropies: Vec<T> = bundle
        .membership
        .par_iter()
        .map(|m| membership_entropy(m, change_points))
        .collect();
    let target = WeightVector::normalized(&scale_map(&entropies));
    let half = T::of(0.5);
    WeightVector(
        current
            .as_slice()
            .iter()
            .zip(target.as_slice())
            .map(|(&w, &f)| half * w + half * f)
            .collect(),
    )
}

/// Alternates weighted clustering with entropy-based weight updates until
/// the weights stay unchanged for [`STABLE_ITERATIONS`] consecutive steps
/// or `max_iter` is reached.
pub fn iterative_weights<T: Scalar>(
    matrix: &RateMatrix<T>,
    bundle: &EncodedBundle<T>,
    k: usize,
    init: &WeightVector<T>,
    max_iter: usize,
) -> Result<IterativeWeights<T>> {
    if init.len() != matrix.cols() || bundle.len() != matrix.cols() {
        return Err(Error::DimMismatch(format!(
            "{} weights and {} sequences for a matrix with {} columns",
            init.len(),
            bundle.len(),
            matrix.cols()
        )));
    }
    let tol = T::of(CHANGE_TOLERANCE);
    let mut w = init.clone();
    let mut stable = 0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        let clustered = constrained_hclust(&apply_weights(matrix, &w)?, k)?;
        let next = entropy_update(&w, bundle, &clustered.change_points);
        let change = w
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max);
        w = next;
        if change <= tol {
            stable += 1;
            if stable >= STABLE_ITERATIONS {
                converged = true;
                break;
            }
        } else {
            stable = 0;
        }
    }
    let result = constrained_hclust(&apply_weights(matrix, &w)?, k)?;
    Ok(IterativeWeights {
        weights: w,
        result,
        iterations,
        converged,
    })
}
