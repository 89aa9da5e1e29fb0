// SPDX-License-Identifier: MIT OR Apache-2.0

//! Encoding of raw series into binary sequences.
//!
//! Three encodings are provided: nearest-neighbour subsampling around
//! K-means centroids (multivariate), a two-sided threshold rule
//! (univariate), and exact pattern matching on symbol sequences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernoulli::BinarySeq;
use crate::error::{Error, Result};
use crate::kmeans;
use crate::scalar::Scalar;

/// `n x p` real-valued observations stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericSeries<T> {
    n: usize,
    p: usize,
    data: Vec<T>,
    names: Option<Vec<String>>,
}

impl<T: Scalar> NumericSeries<T> {
    pub fn new(data: Vec<T>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidInput("series needs at least one column".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInput(format!("series needs at least 2 observations, got {n}")));
        }
        if data.len() != n * p {
            return Err(Error::LengthMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                i / p + 1,
                i % p + 1
            )));
        }
        Ok(Self {
            n,
            p,
            data,
            names: None,
        })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::RaggedRows {
                row: i + 1,
                expected: p,
                found: r.len(),
            });
        }
        Self::new(rows.iter().flatten().copied().collect(), rows.len(), p)
    }

    pub fn univariate(values: Vec<T>) -> Result<Self> {
        let n = values.len();
        Self::new(values, n, 1)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Self {
        self.names = Some(names);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Row `i`, 0-based.
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Sequence of symbols from a finite alphabet.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CategoricalSeries {
    symbols: Vec<String>,
}

impl CategoricalSeries {
    pub fn new(symbols: Vec<String>) -> Result<Self> {
        if symbols.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "series needs at least 2 observations, got {}",
                symbols.len()
            )));
        }
        Ok(Self { symbols })
    }

    /// One symbol per character, e.g. a nucleotide string.
    pub fn from_chars(s: &str) -> Result<Self> {
        Self::new(s.chars().map(String::from).collect())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Series<T> {
    Numeric(NumericSeries<T>),
    Categorical(CategoricalSeries),
}

impl<T: Scalar> Series<T> {
    pub fn len(&self) -> usize {
        match self {
            Series::Numeric(s) => s.len(),
            Series::Categorical(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansSpec {
    /// Number of encoded sequences (and K-means clusters).
    pub sequences: usize,
    /// Share of the observations marked in every sequence.
    pub fraction: f64,
    pub seed: u64,
}

impl Default for KMeansSpec {
    fn default() -> Self {
        Self {
            sequences: 50,
            fraction: 0.1,
            seed: 0,
        }
    }
}

impl KMeansSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sequences == 0 {
            return Err(Error::Config("number of sequences must be at least 1".into()));
        }
        if !(self.fraction > 0.0 && self.fraction < 1.0) {
            return Err(Error::Config(format!(
                "subsample fraction must lie in (0, 1), got {}",
                self.fraction
            )));
        }
        Ok(())
    }

    pub fn marks_per_sequence(&self, n: usize) -> usize {
        (self.fraction * n as f64).floor() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Thresholds {
    /// Raw cut-offs on the data scale.
    Raw { alpha: f64, beta: f64 },
    /// Empirical quantile levels in `[0, 1]`.
    Quantile { lower: f64, upper: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum EncodingSpec {
    KmeansSubsample(KMeansSpec),
    Quantile(Thresholds),
    Pattern { pattern: Vec<String> },
}

impl Default for EncodingSpec {
    fn default() -> Self {
        EncodingSpec::KmeansSubsample(KMeansSpec::default())
    }
}

/// Encoded binary sequences with the time points each one marks.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedBundle<T> {
    pub sequences: Vec<BinarySeq>,
    /// 1-based marked time points of every sequence, increasing.
    pub membership: Vec<Vec<usize>>,
    pub centroids: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> EncodedBundle<T> {
    pub fn from_sequences(sequences: Vec<BinarySeq>) -> Self {
        let membership = sequences.iter().map(BinarySeq::one_positions).collect();
        Self {
            sequences,
            membership,
            centroids: None,
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Length of every sequence.
    pub fn series_len(&self) -> usize {
        self.sequences.first().map_or(0, BinarySeq::len)
    }
}

pub fn encode<T: Scalar>(series: &Series<T>, spec: &EncodingSpec) -> Result<EncodedBundle<T>> {
    match (series, spec) {
        (Series::Numeric(s), EncodingSpec::KmeansSubsample(k)) => kmeans_encode(s, k),
        (Series::Numeric(s), EncodingSpec::Quantile(t)) => quantile_encode(s, *t),
        (Series::Categorical(s), EncodingSpec::Pattern { pattern }) => pattern_encode(s, pattern),
        (Series::Categorical(_), _) => Err(Error::Config(
            "categorical series can only be pattern-encoded".into(),
        )),
        (Series::Numeric(_), EncodingSpec::Pattern { .. }) => Err(Error::Config(
            "pattern encoding needs a categorical series".into(),
        )),
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile<T: Scalar>(sorted: &[T], level: f64) -> T {
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * T::of(h - lo as f64)
}

/// Per-column robust standardization: median and IQR, falling back to mean
/// and standard deviation when the IQR vanishes.
pub fn standardize<T: Scalar>(series: &NumericSeries<T>) -> NumericSeries<T> {
    let (n, p) = (series.len(), series.dim());
    let mut data = series.data().to_vec();
    for j in 0..p {
        let mut col = series.column(j);
        col.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
        let median = quantile(&col, 0.5);
        let iqr = quantile(&col, 0.75) - quantile(&col, 0.25);
        let (center, scale) = if iqr > T::zero() {
            (median, iqr)
        } else {
            let nn = T::of_usize(n);
            let mean = col.iter().copied().sum::<T>() / nn;
            let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / nn;
            let sd = var.sqrt();
            (mean, if sd > T::zero() { sd } else { T::one() })
        };
        for i in 0..n {
            data[i * p + j] = (data[i * p + j] - center) / scale;
        }
    }
    NumericSeries {
        n,
        p,
        data,
        names: series.names.clone(),
    }
}

/// 1-based indices of the `m` rows closest to `center`, ties to the lower index.
pub fn nearest_rows<T: Scalar>(series: &NumericSeries<T>, center: &[T], m: usize) -> Vec<usize> {
    let mut order: Vec<(T, usize)> = series
        .rows()
        .enumerate()
        .map(|(i, r)| (kmeans::sq_dist(r, center), i))
        .collect();
    let by_key = |a: &(T, usize), b: &(T, usize)| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
    };
    if m < order.len() {
        order.select_nth_unstable_by(m, by_key);
        order.truncate(m);
    }
    let mut idx: Vec<usize> = order.into_iter().map(|(_, i)| i + 1).collect();
    idx.sort_unstable();
    idx
}

/// Marks, for every center, its `m` nearest rows.
pub fn mark_nearest<T: Scalar>(series: &NumericSeries<T>, centers: &[Vec<T>], m: usize) -> Result<EncodedBundle<T>> {
    if let Some(c) = centers.iter().find(|c| c.len() != series.dim()) {
        return Err(Error::DimMismatch(format!(
            "center has dimension {}, series has {}",
            c.len(),
            series.dim()
        )));
    }
    let n = series.len();
    let membership: Vec<Vec<usize>> = centers.par_iter().map(|c| nearest_rows(series, c, m)).collect();
    let sequences = membership
        .iter()
        .map(|members| {
            let mut bits = vec![0u8; n];
            for &t in members {
                bits[t - 1] = 1;
            }
            BinarySeq::new(bits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EncodedBundle {
        sequences,
        membership,
        centroids: Some(centers.to_vec()),
    })
}

/// K-means subsampling: standardize, cluster into `V` centroids, and mark
/// the `floor(fraction * N)` nearest observations of each centroid.
pub fn kmeans_encode<T: Scalar>(series: &NumericSeries<T>, spec: &KMeansSpec) -> Result<EncodedBundle<T>> {
    spec.validate()?;
    let m = spec.marks_per_sequence(series.len());
    if m == 0 {
        return Err(Error::Config(format!(
            "fraction {} of {} observations marks no points",
            spec.fraction,
            series.len()
        )));
    }
    let scaled = standardize(series);
    let rows: Vec<&[T]> = scaled.rows().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let fit = kmeans::fit(&rows, spec.sequences, &mut rng)?;
    mark_nearest(&scaled, &fit.centroids, m)
}

/// `E_t = 1` iff `X_t <= alpha` or `X_t >= beta`.
pub fn quantile_encode<T: Scalar>(series: &NumericSeries<T>, thresholds: Thresholds) -> Result<EncodedBundle<T>> {
    if series.dim() != 1 {
        return Err(Error::DimMismatch(format!(
            "threshold encoding needs a univariate series, got {} columns",
            series.dim()
        )));
    }
    let values = series.column(0);
    let (alpha, beta) = match thresholds {
        Thresholds::Raw { alpha, beta } => {
            if !(alpha < beta) {
                return Err(Error::BadThresholds { alpha, beta });
            }
            (T::of(alpha), T::of(beta))
        }
        Thresholds::Quantile { lower, upper } => {
            if !(lower < upper) || lower < 0.0 || upper > 1.0 {
                return Err(Error::BadThresholds {
                    alpha: lower,
                    beta: upper,
                });
            }
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite data"));
            (quantile(&sorted, lower), quantile(&sorted, upper))
        }
    };
    let seq = BinarySeq::from_bools(values.iter().map(|&x| x <= alpha || x >= beta))?;
    Ok(EncodedBundle::from_sequences(vec![seq]))
}

/// `E_t = 1` iff the window of symbols starting at `t` equals `pattern`.
/// The output has `N - L + 1` entries.
pub fn pattern_encode<T: Scalar>(series: &CategoricalSeries, pattern: &[String]) -> Result<EncodedBundle<T>> {
    if pattern.is_empty() {
        return Err(Error::Config("pattern must contain at least one symbol".into()));
    }
    if pattern.len() > series.len() {
        return Err(Error::PatternLongerThanSeries {
            pattern: pattern.len(),
            series: series.len(),
        });
    }
    let seq = BinarySeq::from_bools(series.symbols().windows(pattern.len()).map(|w| w == pattern))?;
    Ok(EncodedBundle::from_sequences(vec![seq]))
}
