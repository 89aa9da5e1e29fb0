// SPDX-License-Identifier: MIT OR Apache-2.0

//! End-to-end detection: encode, segment every sequence, aggregate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{build_rate_matrix, constrained_hclust, RateMatrix};
use crate::bernoulli::{merge_search, Penalty, Segmentation};
use crate::encoder::{encode, EncodedBundle, EncodingSpec, Series};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stability::{
    bin_profile, bin_width_for, connected_windows, default_smooth_window, local_maxima, selection_profile,
    selection_set, threshold_select, BinnedProfile, SelectionProfile, DEFAULT_BINS, DEFAULT_PI,
};
use crate::weighting::{apply_weights, iterative_weights, simple_weights, WeightVector, DEFAULT_MAX_ITER};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    None,
    #[default]
    Simple,
    Iterative,
}

impl std::str::FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Weighting::None),
            "simple" => Ok(Weighting::Simple),
            "iterative" => Ok(Weighting::Iterative),
            other => Err(Error::Config(format!("unknown weighting '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub encoding: EncodingSpec,
    pub penalty: Penalty,
    pub weighting: Weighting,
    pub max_iter: usize,
    /// Widen each per-sequence estimate to the gap between its flanking 1's.
    pub expand: bool,
    pub pi_threshold: f64,
    pub bins: usize,
    /// Odd moving-average width for peak finding; `None` picks a default.
    pub smooth_window: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            encoding: EncodingSpec::default(),
            penalty: Penalty::Aic,
            weighting: Weighting::Simple,
            max_iter: DEFAULT_MAX_ITER,
            expand: true,
            pi_threshold: DEFAULT_PI,
            bins: DEFAULT_BINS,
            smooth_window: None,
        }
    }
}

/// Encoded sequences with their individual segmentations.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFits<T> {
    pub bundle: EncodedBundle<T>,
    pub segmentations: Vec<Segmentation<T>>,
}

impl<T: Scalar> SequenceFits<T> {
    pub fn losses(&self) -> Vec<T> {
        self.segmentations.iter().map(|s| s.loss).collect()
    }
}

pub fn fit_sequences<T: Scalar>(series: &Series<T>, encoding: &EncodingSpec, penalty: Penalty) -> Result<SequenceFits<T>> {
    let bundle = encode(series, encoding)?;
    let phi = T::of(penalty.coefficient(bundle.series_len()));
    let segmentations = bundle.sequences.par_iter().map(|s| merge_search(s, phi)).collect();
    Ok(SequenceFits { bundle, segmentations })
}

fn weights_for<T: Scalar>(fits: &SequenceFits<T>, weighting: Weighting) -> Result<WeightVector<T>> {
    match weighting {
        Weighting::None => Ok(WeightVector::uniform(fits.bundle.len())),
        Weighting::Simple | Weighting::Iterative => simple_weights(&fits.losses()),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnownKDetection<T> {
    pub change_points: Vec<usize>,
    pub g_value: T,
    pub weights: WeightVector<T>,
    /// Weight-update rounds; zero unless iterative weighting ran.
    pub iterations: usize,
    pub converged: bool,
    pub fits: SequenceFits<T>,
}

/// Detects exactly `k` change points.
pub fn detect_known_k<T: Scalar>(series: &Series<T>, k: usize, cfg: &PipelineConfig) -> Result<KnownKDetection<T>> {
    let fits = fit_sequences(series, &cfg.encoding, cfg.penalty)?;
    let matrix: RateMatrix<T> = build_rate_matrix(&fits.bundle, &fits.segmentations)?;
    if k >= matrix.rows() {
        return Err(Error::KTooLarge { k, n: matrix.rows() });
    }
    let base = weights_for(&fits, cfg.weighting)?;
    let (result, weights, iterations, converged) = match cfg.weighting {
        Weighting::Iterative => {
            let it = iterative_weights(&matrix, &fits.bundle, k, &base, cfg.max_iter)?;
            (it.result, it.weights, it.iterations, it.converged)
        }
        _ => (constrained_hclust(&apply_weights(&matrix, &base)?, k)?, base, 0, true),
    };
    Ok(KnownKDetection {
        change_points: result.change_points,
        g_value: result.g_value,
        weights,
        iterations,
        converged,
        fits,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityDetection<T> {
    pub profile: SelectionProfile<T>,
    pub weights: Option<WeightVector<T>>,
    /// Time points at or above the threshold.
    pub selected: Vec<usize>,
    pub windows: Vec<(usize, usize)>,
    /// Number of connected windows above the threshold.
    pub estimated_k: usize,
    /// Smoothed profile maxima, strongest first, one per estimated change.
    pub change_points: Vec<usize>,
    pub smooth_window: usize,
    pub binned: BinnedProfile<T>,
    pub fits: SequenceFits<T>,
}

/// Detection without a known number of change points.
pub fn detect_stability<T: Scalar>(series: &Series<T>, cfg: &PipelineConfig) -> Result<StabilityDetection<T>> {
    detect_stability_top(series, cfg, None)
}

/// Like [`detect_stability`], but reports `top_k` maxima when given.
pub fn detect_stability_top<T: Scalar>(
    series: &Series<T>,
    cfg: &PipelineConfig,
    top_k: Option<usize>,
) -> Result<StabilityDetection<T>> {
    if cfg.bins == 0 {
        return Err(Error::Config("bin count must be positive".into()));
    }
    let fits = fit_sequences(series, &cfg.encoding, cfg.penalty)?;
    let n = fits.bundle.series_len();
    let sets: Vec<_> = fits
        .bundle
        .sequences
        .iter()
        .zip(&fits.segmentations)
        .map(|(s, seg)| selection_set(s, seg, cfg.expand))
        .collect();
    let weights = match cfg.weighting {
        Weighting::None => None,
        w => Some(weights_for(&fits, w)?),
    };
    let profile = selection_profile(&sets, weights.as_ref())?;
    let selected = threshold_select(&profile, T::of(cfg.pi_threshold));
    let windows = connected_windows(&selected);
    let estimated_k = windows.len();
    let smooth_window = cfg.smooth_window.unwrap_or_else(|| default_smooth_window(n));
    let change_points = local_maxima(&profile, smooth_window, Some(top_k.unwrap_or(estimated_k)))?;
    let binned = bin_profile(&profile, bin_width_for(n, cfg.bins))?;
    Ok(StabilityDetection {
        profile,
        weights,
        selected,
        windows,
        estimated_k,
        change_points,
        smooth_window,
        binned,
        fits,
    })
}
