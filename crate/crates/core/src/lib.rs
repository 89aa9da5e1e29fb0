// SPDX-License-Identifier: MIT OR Apache-2.0

//! Nonparametric multiple change-point detection.
//!
//! Observations are encoded into binary sequences, each sequence is
//! segmented by a penalized-likelihood merging search over recurrence
//! times, and the per-sequence results are combined either by
//! contiguity-constrained Ward clustering of the rate matrix (known number
//! of change points) or by stability voting (unknown number).

#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod bernoulli;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod io;
pub mod kmeans;
pub mod pipeline;
pub mod scalar;
pub mod simulation;
pub mod stability;
pub mod weighting;

pub use bernoulli::{
    encode_recurrence, merge_search, merge_search_with_stats, penalized_loss, segment_rates, BinarySeq, Penalty,
    RecurrenceSeq, SearchStats, Segmentation,
};
pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub use experiment::{run_experiment, ExperimentGrid, ExperimentTable, Method, ScenarioKind};
pub use io::{ingest_csv, run_detect, ResultDocument, RunConfig};
pub use pipeline::{detect_known_k, detect_stability, PipelineConfig, Weighting};
pub use simulation::{ari, generate, PartitionLabels, ScenarioSpec};
pub use weighting::WeightVector;

pub type SegmentationF64 = Segmentation<f64>;
pub type SegmentationF32 = Segmentation<f32>;
pub type NumericSeriesF64 = encoder::NumericSeries<f64>;
pub type NumericSeriesF32 = encoder::NumericSeries<f32>;
pub type SeriesF64 = encoder::Series<f64>;
pub type SeriesF32 = encoder::Series<f32>;
pub type EncodedBundleF64 = encoder::EncodedBundle<f64>;
pub type EncodedBundleF32 = encoder::EncodedBundle<f32>;
pub type RateMatrixF64 = aggregation::RateMatrix<f64>;
pub type RateMatrixF32 = aggregation::RateMatrix<f32>;
pub type WeightVectorF64 = WeightVector<f64>;
pub type WeightVectorF32 = WeightVector<f32>;
pub type SelectionProfileF64 = stability::SelectionProfile<f64>;
pub type SelectionProfileF32 = stability::SelectionProfile<f32>;
