// SPDX-License-Identifier: MIT OR Apache-2.0

//! Synthetic piecewise-stationary series and partition agreement scores.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::encoder::NumericSeries;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrStructure {
    /// Every off-diagonal entry equals `rho`.
    FullOffdiag,
    /// Only the first off-diagonals equal `rho`.
    Band1Offdiag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SegmentDistribution {
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
    /// Standard (unscaled) univariate Student-t.
    StudentT { df: f64 },
    /// Zero-mean Gaussian with unit variances and correlation `rho`.
    GaussianCorr { rho: f64, d: usize, structure: CorrStructure },
}

impl SegmentDistribution {
    pub fn dim(&self) -> usize {
        match self {
            SegmentDistribution::Gaussian { mean, .. } => mean.len(),
            SegmentDistribution::StudentT { .. } => 1,
            SegmentDistribution::GaussianCorr { d, .. } => *d,
        }
    }

    pub fn standard_normal(d: usize) -> Self {
        SegmentDistribution::Gaussian {
            mean: vec![0.0; d],
            cov: identity(d),
        }
    }

    pub fn normal(sd: f64) -> Self {
        SegmentDistribution::Gaussian {
            mean: vec![0.0],
            cov: vec![vec![sd * sd]],
        }
    }
}

fn identity(d: usize) -> Vec<Vec<f64>> {
    (0..d).map(|i| (0..d).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

pub fn correlation_matrix(rho: f64, d: usize, structure: CorrStructure) -> Vec<Vec<f64>> {
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| match (i == j, structure) {
                    (true, _) => 1.0,
                    (false, CorrStructure::FullOffdiag) => rho,
                    (false, CorrStructure::Band1Offdiag) if i.abs_diff(j) == 1 => rho,
                    _ => 0.0,
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpec {
    pub distribution: SegmentDistribution,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub segments: Vec<SegmentSpec>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(segments: Vec<(SegmentDistribution, usize)>, seed: u64) -> Self {
        Self {
            segments: segments
                .into_iter()
                .map(|(distribution, len)| SegmentSpec { distribution, len })
                .collect(),
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.segments.iter().map(|s| s.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Last time point of every segment but the final one.
    pub fn change_points(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut cps = Vec::new();
        for s in &self.segments[..self.segments.len().saturating_sub(1)] {
            acc += s.len;
            cps.push(acc);
        }
        cps
    }

    fn validate(&self) -> Result<usize> {
        let first = self
            .segments
            .first()
            .ok_or_else(|| Error::Config("scenario needs at least one segment".into()))?;
        let d = first.distribution.dim();
        for s in &self.segments {
            if s.len == 0 {
                return Err(Error::Config("segment lengths must be positive".into()));
            }
            if s.distribution.dim() != d || d == 0 {
                return Err(Error::Config("all segments must share a positive dimension".into()));
            }
        }
        Ok(d)
    }

    /// Sizes `n, 2n, n` with a standard normal, `middle`, standard normal.
    pub fn unbalanced(middle: SegmentDistribution, n: usize, seed: u64) -> Self {
        let d = middle.dim();
        Self::new(
            vec![
                (SegmentDistribution::standard_normal(d), n),
                (middle, 2 * n),
                (SegmentDistribution::standard_normal(d), n),
            ],
            seed,
        )
    }

    /// Change in variance of a univariate Gaussian.
    pub fn variance_change(n: usize, sigma: f64, seed: u64) -> Self {
        Self::unbalanced(SegmentDistribution::normal(sigma), n, seed)
    }

    /// Change in tailedness: Student-t middle segment.
    pub fn tail_change(n: usize, df: f64, seed: u64) -> Self {
        Self::unbalanced(SegmentDistribution::StudentT { df }, n, seed)
    }

    /// Change in correlation of a `d`-dimensional Gaussian.
    pub fn correlation_change(n: usize, d: usize, rho: f64, structure: CorrStructure, seed: u64) -> Self {
        Self::unbalanced(SegmentDistribution::GaussianCorr { rho, d, structure }, n, seed)
    }

    /// Segments of the given sizes alternating between the standard
    /// bivariate normal and correlation `rho`, starting with the former.
    pub fn alternating_correlation(sizes: &[usize], rho: f64, seed: u64) -> Self {
        let segs = sizes
            .iter()
            .enumerate()
            .map(|(i, &len)| {
                let dist = if i % 2 == 0 {
                    SegmentDistribution::standard_normal(2)
                } else {
                    SegmentDistribution::GaussianCorr {
                        rho,
                        d: 2,
                        structure: CorrStructure::FullOffdiag,
                    }
                };
                (dist, len)
            })
            .collect();
        Self::new(segs, seed)
    }
}

enum Sampler {
    Gaussian { mean: DVector<f64>, chol: DMatrix<f64> },
    StudentT(StudentT<f64>),
}

impl Sampler {
    fn new(dist: &SegmentDistribution) -> Result<Self> {
        let gaussian = |mean: &[f64], cov: &[Vec<f64>]| -> Result<Sampler> {
            let d = mean.len();
            if cov.len() != d || cov.iter().any(|r| r.len() != d) {
                return Err(Error::DimMismatch(format!("covariance is not {d}x{d}")));
            }
            let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
            if (0..d).any(|i| (0..d).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12)) {
                return Err(Error::BadCovariance);
            }
            let chol = m.cholesky().ok_or(Error::BadCovariance)?;
            Ok(Sampler::Gaussian {
                mean: DVector::from_column_slice(mean),
                chol: chol.l(),
            })
        };
        match dist {
            SegmentDistribution::Gaussian { mean, cov } => gaussian(mean, cov),
            SegmentDistribution::GaussianCorr { rho, d, structure } => {
                gaussian(&vec![0.0; *d], &correlation_matrix(*rho, *d, *structure))
            }
            SegmentDistribution::StudentT { df } => StudentT::new(*df)
                .map(Sampler::StudentT)
                .map_err(|e| Error::Config(format!("invalid Student-t degrees of freedom {df}: {e}"))),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Sampler::Gaussian { mean, chol } => {
                let z = DVector::from_fn(mean.len(), |_, _| StandardNormal.sample(rng));
                out.extend((mean + chol * z).iter());
            }
            Sampler::StudentT(t) => out.push(t.sample(rng)),
        }
    }
}

/// Draws the scenario with the given generator.
pub fn generate_with<T: Scalar, R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Result<NumericSeries<T>> {
    let d = spec.validate()?;
    let samplers = spec
        .segments
        .iter()
        .map(|s| Sampler::new(&s.distribution))
        .collect::<Result<Vec<_>>>()?;
    let mut data = Vec::with_capacity(spec.len() * d);
    for (seg, sampler) in spec.segments.iter().zip(&samplers) {
        for _ in 0..seg.len {
            sampler.draw(rng, &mut data);
        }
    }
    NumericSeries::new(data.into_iter().map(T::of).collect(), spec.len(), d)
}

/// Draws the scenario from its own seed.
pub fn generate<T: Scalar>(spec: &ScenarioSpec) -> Result<NumericSeries<T>> {
    generate_with(spec, &mut ChaCha8Rng::seed_from_u64(spec.seed))
}

/// Segment labels of every time point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionLabels {
    pub labels: Vec<usize>,
}

impl PartitionLabels {
    pub fn from_change_points(change_points: &[usize], n: usize) -> Self {
        let labels = (1..=n).map(|t| change_points.partition_point(|&cp| cp < t)).collect();
        Self { labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn pairs(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

struct PairCounts {
    index: f64,
    rows: f64,
    cols: f64,
    total: f64,
}

fn pair_counts(a: &PartitionLabels, b: &PartitionLabels) -> Result<PairCounts> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut ra: HashMap<usize, usize> = HashMap::new();
    let mut rb: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.labels.iter().zip(&b.labels) {
        *table.entry((x, y)).or_default() += 1;
        *ra.entry(x).or_default() += 1;
        *rb.entry(y).or_default() += 1;
    }
    Ok(PairCounts {
        index: table.values().map(|&c| pairs(c)).sum(),
        rows: ra.values().map(|&c| pairs(c)).sum(),
        cols: rb.values().map(|&c| pairs(c)).sum(),
        total: pairs(a.len()),
    })
}

/// Share of point pairs on which the two partitions agree.
pub fn rand_index(a: &PartitionLabels, b: &PartitionLabels) -> Result<f64> {
    let c = pair_counts(a, b)?;
    if c.total == 0.0 {
        return Ok(1.0);
    }
    Ok((c.total + 2.0 * c.index - c.rows - c.cols) / c.total)
}

/// Adjusted Rand index (Hubert and Arabie).
pub fn ari(a: &PartitionLabels, b: &PartitionLabels) -> Result<f64> {
    let c = pair_counts(a, b)?;
    if c.total == 0.0 {
        return Ok(1.0);
    }
    let expected = c.rows * c.cols / c.total;
    let max = 0.5 * (c.rows + c.cols);
    if max == expected {
        // Both partitions are trivial (all singletons or a single class).
        return Ok(if c.index == max { 1.0 } else { 0.0 });
    }
    Ok((c.index - expected) / (max - expected))
}

/// ARI between two change-point sets over `n` points.
pub fn change_point_ari(truth: &[usize], detected: &[usize], n: usize) -> f64 {
    ari(
        &PartitionLabels::from_change_points(truth, n),
        &PartitionLabels::from_change_points(detected, n),
    )
    .expect("labels built over the same length")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize]) -> PartitionLabels {
        PartitionLabels { labels: v.to_vec() }
    }

    #[test]
    fn band_structure() {
        let m = correlation_matrix(0.5, 3, CorrStructure::Band1Offdiag);
        assert_eq!(m, vec![vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.5], vec![0.0, 0.5, 1.0]]);
        let m = correlation_matrix(0.2, 3, CorrStructure::FullOffdiag);
        assert_eq!(m[0], vec![1.0, 0.2, 0.2]);
    }

    #[test]
    fn standard_normal_moments() {
        let spec = ScenarioSpec::new(vec![(SegmentDistribution::standard_normal(1), 1000)], 11);
        let s: NumericSeries<f64> = generate(&spec).unwrap();
        let x = s.column(0);
        let mean = x.iter().sum::<f64>() / 1000.0;
        let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 999.0;
        assert!(mean.abs() < 0.1, "mean {mean}");
        assert!((var - 1.0).abs() < 0.15, "var {var}");
    }

    #[test]
    fn correlated_segment_moments() {
        let spec = ScenarioSpec::new(
            vec![(
                SegmentDistribution::GaussianCorr {
                    rho: 0.7,
                    d: 2,
                    structure: CorrStructure::FullOffdiag,
                },
                2000,
            )],
            5,
        );
        let s: NumericSeries<f64> = generate(&spec).unwrap();
        let (x, y) = (s.column(0), s.column(1));
        let mx = x.iter().sum::<f64>() / 2000.0;
        let my = y.iter().sum::<f64>() / 2000.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        let r = sxy / (sxx * syy).sqrt();
        assert!((r - 0.7).abs() < 0.07, "r {r}");
    }

    #[test]
    fn lengths_and_change_points() {
        let spec = ScenarioSpec::variance_change(100, 4.0, 1);
        assert_eq!(spec.len(), 400);
        assert_eq!(spec.change_points(), vec![100, 300]);
        let s: NumericSeries<f64> = generate(&spec).unwrap();
        assert_eq!(s.len(), 400);
        let spec = ScenarioSpec::alternating_correlation(&[500; 7], 0.7, 1);
        assert_eq!(spec.change_points(), vec![500, 1000, 1500, 2000, 2500, 3000]);
    }

    #[test]
    fn rejects_indefinite_covariance() {
        let spec = ScenarioSpec::new(
            vec![(
                SegmentDistribution::Gaussian {
                    mean: vec![0.0, 0.0],
                    cov: vec![vec![1.0, 2.0], vec![2.0, 1.0]],
                },
                10,
            )],
            0,
        );
        assert!(matches!(generate::<f64>(&spec), Err(Error::BadCovariance)));
    }

    #[test]
    fn generation_is_seeded() {
        let spec = ScenarioSpec::tail_change(50, 2.0, 9);
        let a: NumericSeries<f64> = generate(&spec).unwrap();
        let b: NumericSeries<f64> = generate(&spec).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ari_examples() {
        let a = labels(&[0, 0, 1, 1, 2, 2]);
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
        let one = labels(&[0; 6]);
        assert_eq!(ari(&one, &a).unwrap(), 0.0);
        assert_eq!(ari(&a, &one).unwrap(), 0.0);
        let b = labels(&[0, 0, 0, 1, 1, 1]);
        assert_eq!(ari(&a, &b).unwrap(), ari(&b, &a).unwrap());
        assert!(matches!(ari(&a, &labels(&[0])), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn ari_against_hand_computation() {
        // a = {1,2},{3,4,5}; b = {1,2,3},{4,5}
        // table: [[2,0],[1,2]] -> index = 1 + 0 + 0 + 1 = 2
        // rows: C(2,2)+C(3,2) = 4, cols: 3+1 = 4, total C(5,2) = 10
        // expected = 1.6, max = 4 -> ARI = 0.4 / 2.4
        let a = PartitionLabels::from_change_points(&[2], 5);
        let b = PartitionLabels::from_change_points(&[3], 5);
        assert!((ari(&a, &b).unwrap() - 0.4 / 2.4).abs() < 1e-12);
        assert!((rand_index(&a, &b).unwrap() - 0.6).abs() < 1e-12);
    }
}
