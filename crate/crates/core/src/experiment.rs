// SPDX-License-Identifier: MIT OR Apache-2.0

//! Replicated simulation experiments reporting mean and sd of the ARI.

use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernoulli::Penalty;
use crate::encoder::{EncodingSpec, KMeansSpec, Series};
use crate::error::{Error, Result};
use crate::pipeline::{detect_known_k, detect_stability, PipelineConfig, Weighting};
use crate::simulation::{change_point_ari, generate_with, CorrStructure, ScenarioSpec};

/// Share of failed replicates above which a cell is reported as failed.
pub const MAX_FAILURE_SHARE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Univariate Gaussian, middle segment with standard deviation `param`.
    VarianceChange,
    /// Univariate, middle segment Student-t with `param` degrees of freedom.
    TailChange,
    /// Bivariate Gaussian, middle segment with correlation `param`.
    CorrelationChange,
    /// `dim`-variate Gaussian, middle segment with all correlations `param`.
    FullCorrelationChange,
    /// `dim`-variate Gaussian, middle segment with neighbour correlations `param`.
    BandCorrelationChange,
    /// Sizes `n, 2n, n` alternating identity and correlation `param`.
    Alternating3,
    /// Seven segments of size `n` alternating identity and correlation `param`.
    Alternating7,
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table1" | "variance_change" => ScenarioKind::VarianceChange,
            "table2" | "tail_change" => ScenarioKind::TailChange,
            "table3" | "correlation_change" => ScenarioKind::CorrelationChange,
            "table4" | "table4_full" | "full_correlation_change" => ScenarioKind::FullCorrelationChange,
            "table4_band" | "band_correlation_change" => ScenarioKind::BandCorrelationChange,
            "stability1" | "alternating3" => ScenarioKind::Alternating3,
            "stability2" | "alternating7" => ScenarioKind::Alternating7,
            other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
        })
    }
}

impl ScenarioKind {
    pub fn spec(self, n: usize, param: f64, dim: usize, seed: u64) -> ScenarioSpec {
        match self {
            ScenarioKind::VarianceChange => ScenarioSpec::variance_change(n, param, seed),
            ScenarioKind::TailChange => ScenarioSpec::tail_change(n, param, seed),
            ScenarioKind::CorrelationChange => {
                ScenarioSpec::correlation_change(n, 2, param, CorrStructure::FullOffdiag, seed)
            }
            ScenarioKind::FullCorrelationChange => {
                ScenarioSpec::correlation_change(n, dim, param, CorrStructure::FullOffdiag, seed)
            }
            ScenarioKind::BandCorrelationChange => {
                ScenarioSpec::correlation_change(n, dim, param, CorrStructure::Band1Offdiag, seed)
            }
            ScenarioKind::Alternating3 => ScenarioSpec::alternating_correlation(&[n, 2 * n, n], param, seed),
            ScenarioKind::Alternating7 => ScenarioSpec::alternating_correlation(&[n; 7], param, seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Simple,
    Iterative,
    Stability,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(Method::Simple),
            "iterative" => Ok(Method::Iterative),
            "stability" => Ok(Method::Stability),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Simple => "simple",
            Method::Iterative => "iterative",
            Method::Stability => "stability",
        })
    }
}

fn default_dim() -> usize {
    10
}

fn default_sequences() -> usize {
    50
}

fn default_fraction() -> f64 {
    0.1
}

/// Experiment grid, readable from a TOML key-value file:
///
/// ```toml
/// scenario = "variance_change"
/// sizes = [100, 200, 300]
/// params = [1.5, 2.0, 4.0]
/// method = "simple"
/// replicates = 100
/// seed = 1
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentGrid {
    pub scenario: ScenarioKind,
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub method: Method,
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sequences")]
    pub sequences: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default)]
    pub penalty: Penalty,
}

impl ExperimentGrid {
    pub fn from_toml(text: &str) -> Result<Self> {
        let grid: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 2 {
            return Err(Error::Config(format!("need at least 2 replicates, got {}", self.replicates)));
        }
        if self.sizes.is_empty() || self.params.is_empty() {
            return Err(Error::Config("grid needs at least one size and one parameter".into()));
        }
        KMeansSpec {
            sequences: self.sequences,
            fraction: self.fraction,
            seed: 0,
        }
        .validate()
    }

    fn pipeline(&self, kmeans_seed: u64) -> PipelineConfig {
        PipelineConfig {
            encoding: EncodingSpec::KmeansSubsample(KMeansSpec {
                sequences: self.sequences,
                fraction: self.fraction,
                seed: kmeans_seed,
            }),
            penalty: self.penalty,
            weighting: match self.method {
                Method::Iterative => Weighting::Iterative,
                _ => Weighting::Simple,
            },
            ..PipelineConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub param: f64,
    pub aris: Vec<f64>,
    pub failures: usize,
    pub failed: bool,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentTable {
    pub grid: ExperimentGrid,
    pub cells: Vec<CellResult>,
}

/// Generator of one replicate: the master seed mixed with the cell, and
/// the replicate index as the stream.
pub fn replicate_rng(master_seed: u64, cell: usize, replicate: usize) -> ChaCha8Rng {
    let mut seeder = ChaCha8Rng::seed_from_u64(master_seed);
    seeder.set_stream(cell as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seeder.next_u64());
    rng.set_stream(replicate as u64);
    rng
}

/// ARI of one replicate of a cell.
pub fn run_replicate(grid: &ExperimentGrid, n: usize, param: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let spec = grid.scenario.spec(n, param, grid.dim, 0);
    let series = Series::Numeric(generate_with::<f64, _>(&spec, rng)?);
    let cfg = grid.pipeline(rng.next_u64());
    let truth = spec.change_points();
    let detected = match grid.method {
        Method::Simple | Method::Iterative => detect_known_k(&series, truth.len(), &cfg)?.change_points,
        Method::Stability => {
            let mut cps = detect_stability(&series, &cfg)?.change_points;
            cps.sort_unstable();
            cps
        }
    };
    Ok(change_point_ari(&truth, &detected, spec.len()))
}

fn summarize(n: usize, param: f64, outcomes: Vec<Result<f64>>) -> CellResult {
    let total = outcomes.len();
    let aris: Vec<f64> = outcomes.into_iter().filter_map(|r| r.ok()).collect();
    let failures = total - aris.len();
    let failed = failures as f64 > MAX_FAILURE_SHARE * total as f64 || aris.len() < 2;
    let (mean, sd) = if failed {
        (f64::NAN, f64::NAN)
    } else {
        // Sequential sums in replicate order keep the table bit-identical.
        let m = aris.iter().sum::<f64>() / aris.len() as f64;
        let var = aris.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (aris.len() - 1) as f64;
        (m, var.sqrt())
    };
    CellResult {
        n,
        param,
        aris,
        failures,
        failed,
        mean,
        sd,
    }
}

pub fn run_experiment(grid: &ExperimentGrid) -> Result<ExperimentTable> {
    grid.validate()?;
    let cells: Vec<(usize, f64)> = grid
        .sizes
        .iter()
        .flat_map(|&n| grid.params.iter().map(move |&p| (n, p)))
        .collect();
    let results = cells
        .iter()
        .enumerate()
        .map(|(c, &(n, param))| {
            let outcomes: Vec<Result<f64>> = (0..grid.replicates)
                .into_par_iter()
                .map(|r| run_replicate(grid, n, param, &mut replicate_rng(grid.seed, c, r)))
                .collect();
            summarize(n, param, outcomes)
        })
        .collect();
    Ok(ExperimentTable {
        grid: grid.clone(),
        cells: results,
    })
}

impl ExperimentTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,method,n,param,mean_ari,sd_ari,replicates,failures,status\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{},{},{}",
                scenario_name(self.grid.scenario),
                self.grid.method,
                c.n,
                c.param,
                c.mean,
                c.sd,
                self.grid.replicates,
                c.failures,
                if c.failed { "failed" } else { "ok" }
            );
        }
        out
    }

    /// Aligned table with `mean (sd)` entries, one row per size and one
    /// column per parameter.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} / {} / {} replicates\n",
            scenario_name(self.grid.scenario),
            self.grid.method,
            self.grid.replicates
        );
        let _ = write!(out, "{:>8}", "n");
        for p in &self.grid.params {
            let _ = write!(out, "  {:>17}", format!("param={p}"));
        }
        out.push('\n');
        for &n in &self.grid.sizes {
            let _ = write!(out, "{n:>8}");
            for c in self.cells.iter().filter(|c| c.n == n) {
                let entry = if c.failed {
                    "failed".to_string()
                } else {
                    format!("{:.4} ({:.4})", c.mean, c.sd)
                };
                let _ = write!(out, "  {entry:>17}");
            }
            out.push('\n');
        }
        out
    }
}

fn scenario_name(kind: ScenarioKind) -> &'static str {
    match kind {
        ScenarioKind::VarianceChange => "variance_change",
        ScenarioKind::TailChange => "tail_change",
        ScenarioKind::CorrelationChange => "correlation_change",
        ScenarioKind::FullCorrelationChange => "full_correlation_change",
        ScenarioKind::BandCorrelationChange => "band_correlation_change",
        ScenarioKind::Alternating3 => "alternating3",
        ScenarioKind::Alternating7 => "alternating7",
    }
}
