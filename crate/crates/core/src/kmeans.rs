// SPDX-License-Identifier: MIT OR Apache-2.0

//! Lloyd's K-means with seeded k-means++ initialization.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct KMeansFit<T> {
    /// `k` centroids, each of dimension `p`.
    pub centroids: Vec<Vec<T>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// Number of distinct rows.
pub fn distinct_rows<T: Scalar>(rows: &[&[T]]) -> usize {
    let mut sorted: Vec<&[T]> = rows.to_vec();
    let cmp = |a: &&[T], b: &&[T]| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    sorted.sort_by(cmp);
    sorted.dedup_by(|a, b| cmp(a, b).is_eq());
    sorted.len()
}

fn nearest<T: Scalar>(row: &[T], centroids: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, T::infinity());
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init<T: Scalar, R: Rng>(rows: &[&[T]], k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = rows.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(rows[rng.random_range(0..n)].to_vec());
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centroids[0]).as_f64()).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    chosen = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            chosen.expect("positive total weight has a positive entry")
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].to_vec();
        for (i, r) in rows.iter().enumerate() {
            let d = sq_dist(r, &c).as_f64();
            if d < d2[i] {
                d2[i] = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

/// Clusters `rows` into `k` groups. Requires at least `k` distinct rows.
pub fn fit<T: Scalar, R: Rng>(rows: &[&[T]], k: usize, rng: &mut R) -> Result<KMeansFit<T>> {
    if k == 0 {
        return Err(Error::InvalidInput("K-means needs at least one cluster".into()));
    }
    let distinct = distinct_rows(rows);
    if distinct < k {
        return Err(Error::DegenerateData(format!(
            "{distinct} distinct rows cannot form {k} clusters"
        )));
    }
    let p = rows[0].len();
    let mut centroids = plus_plus_init(rows, k, rng);
    let mut assignments = vec![0usize; rows.len()];
    let tol = T::of(TOLERANCE);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let nearest_pairs: Vec<(usize, T)> = rows.par_iter().map(|r| nearest(r, &centroids)).collect();
        for (a, &(c, _)) in assignments.iter_mut().zip(&nearest_pairs) {
            *a = c;
        }

        let mut sums = vec![vec![T::zero(); p]; k];
        let mut counts = vec![0usize; k];
        for (r, &c) in rows.iter().zip(&assignments) {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(r.iter()) {
                *s = *s + x;
            }
        }

        // Empty clusters take the point farthest from its own centroid.
        let mut taken = vec![false; rows.len()];
        let mut next = Vec::with_capacity(k);
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = T::of_usize(counts[c]);
                next.push(sums[c].iter().map(|&s| s / cnt).collect::<Vec<T>>());
            } else {
                let far = nearest_pairs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !taken[*i])
                    .fold(None::<(usize, T)>, |acc, (i, &(_, d))| match acc {
                        Some((_, bd)) if bd >= d => acc,
                        _ => Some((i, d)),
                    })
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                taken[far] = true;
                next.push(rows[far].to_vec());
            }
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(T::zero(), T::max);
        centroids = next;
        if shift <= tol {
            converged = true;
            break;
        }
    }

    for (a, r) in assignments.iter_mut().zip(rows) {
        *a = nearest(r, &centroids).0;
    }

    Ok(KMeansFit {
        centroids,
        assignments,
        iterations,
        converged,
    })
}
