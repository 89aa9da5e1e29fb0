// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force reference implementations shared by the integration tests.

#![allow(dead_code)]

use bernoulli_mcp::aggregation::RateMatrix;
use bernoulli_mcp::BinarySeq;
use rand::seq::index::sample;
use rand::Rng;

/// Bernoulli `-2 log L + phi (2k + 1)` straight from the definition.
pub fn direct_loss(values: &[u8], cps: &[usize], phi: f64) -> f64 {
    let n = values.len();
    let mut bounds = vec![0];
    bounds.extend_from_slice(cps);
    bounds.push(n);
    let mut ll = 0.0;
    for w in bounds.windows(2) {
        let seg = &values[w[0]..w[1]];
        let p = seg.iter().filter(|&&v| v == 1).count() as f64 / seg.len() as f64;
        for &e in seg {
            let q = if e == 1 { p } else { 1.0 - p };
            if q > 0.0 {
                ll += q.ln();
            }
        }
    }
    -2.0 * ll + phi * (2 * cps.len() + 1) as f64
}

/// Smallest loss over every partition with at most two change points
/// drawn from `candidates`.
pub fn oracle_min_loss(values: &[u8], candidates: &[usize], phi: f64) -> f64 {
    let mut best = direct_loss(values, &[], phi);
    for (i, &a) in candidates.iter().enumerate() {
        best = best.min(direct_loss(values, &[a], phi));
        for &b in &candidates[i + 1..] {
            best = best.min(direct_loss(values, &[a, b], phi));
        }
    }
    best
}

/// Interior positions holding a 1.
pub fn one_positions(values: &[u8]) -> Vec<usize> {
    (1..values.len()).filter(|&t| values[t - 1] == 1).collect()
}

/// Sequence of length `n` with exactly `ones` 1's at random positions.
pub fn random_seq<R: Rng>(rng: &mut R, n: usize, ones: usize) -> BinarySeq {
    let mut v = vec![0u8; n];
    for i in sample(rng, n, ones) {
        v[i] = 1;
    }
    BinarySeq::new(v).unwrap()
}

/// Within-segment statistic computed from scratch.
pub fn direct_g(m: &RateMatrix<f64>, cps: &[usize]) -> f64 {
    let n = m.rows();
    let mut bounds = vec![0];
    bounds.extend_from_slice(cps);
    bounds.push(n);
    let mut total = 0.0;
    for w in bounds.windows(2) {
        let len = (w[1] - w[0]) as f64;
        for j in 0..m.cols() {
            let mean = (w[0] + 1..=w[1]).map(|t| m.get(t, j)).sum::<f64>() / len;
            let ss: f64 = (w[0] + 1..=w[1]).map(|t| (m.get(t, j) - mean).powi(2)).sum();
            total += ss / len;
        }
    }
    total
}

/// All increasing `k`-subsets of `1..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for t in start..n {
            cur.push(t);
            go(t + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, k, &mut Vec::new(), &mut out);
    out
}
