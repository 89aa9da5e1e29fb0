// SPDX-License-Identifier: MIT OR Apache-2.0

//! File ingestion, run configuration, result documents and plot data.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bernoulli::Penalty;
use crate::encoder::{CategoricalSeries, EncodingSpec, KMeansSpec, NumericSeries, Series, Thresholds};
use crate::error::{Error, Result};
use crate::pipeline::{detect_known_k, detect_stability, PipelineConfig, SequenceFits, Weighting};
use crate::scalar::Scalar;
use crate::stability::{bin_profile, smooth, SelectionProfile, DEFAULT_BINS, DEFAULT_PI};
use crate::weighting::DEFAULT_MAX_ITER;

/// Parses CSV text into a numeric or single-column categorical series.
///
/// A first row is taken as a header when it holds a non-numeric field
/// while the rows below it are numeric. A single column whose values are
/// not all numeric is read as a symbol sequence without a header.
pub fn parse_csv<T: Scalar>(text: &str) -> Result<Series<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(rows.len() + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        rows.push((line, record.iter().map(str::to_owned).collect()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyFile);
    }
    let numeric = |s: &str| s.parse::<f64>().is_ok_and(f64::is_finite);
    let width = rows[0].1.len();

    if width == 1 && rows.iter().skip(1).any(|(_, r)| !numeric(&r[0])) {
        for (line, r) in &rows {
            if r.len() != 1 {
                return Err(Error::RaggedRows {
                    row: *line,
                    expected: 1,
                    found: r.len(),
                });
            }
        }
        let symbols = rows.into_iter().map(|(_, mut r)| r.remove(0)).collect();
        return CategoricalSeries::new(symbols).map(Series::Categorical);
    }

    let has_header = !rows[0].1.iter().all(|f| numeric(f));
    let names = has_header.then(|| rows[0].1.clone());
    let body = &rows[usize::from(has_header)..];
    if body.is_empty() {
        return Err(Error::EmptyFile);
    }
    let mut data = Vec::with_capacity(body.len() * width);
    for (line, r) in body {
        let present = r.iter().filter(|f| !f.is_empty()).count();
        if r.len() != width || present != width {
            return Err(Error::RaggedRows {
                row: *line,
                expected: width,
                found: present.min(r.len()),
            });
        }
        for (j, f) in r.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: *line,
                column: j + 1,
                message: format!("'{f}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: *line,
                    column: j + 1,
                    message: format!("'{f}' is not finite"),
                });
            }
            data.push(T::of(v));
        }
    }
    let series = NumericSeries::new(data, body.len(), width)?;
    Ok(Series::Numeric(match names {
        Some(n) => series.with_names(n),
        None => series,
    }))
}

pub fn ingest_csv<T: Scalar>(path: &Path) -> Result<Series<T>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

/// Writes to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderMode {
    #[default]
    Kmeans,
    Quantile,
    Pattern,
}

impl std::str::FromStr for EncoderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kmeans" => Ok(EncoderMode::Kmeans),
            "quantile" => Ok(EncoderMode::Quantile),
            "pattern" => Ok(EncoderMode::Pattern),
            other => Err(Error::Config(format!("unknown encoder '{other}'"))),
        }
    }
}

/// Every setting of a detection run. Field names match the command-line
/// flags, with dashes replaced by underscores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Number of encoded sequences.
    #[serde(rename = "V")]
    pub v: usize,
    pub subsample_fraction: f64,
    pub penalty: Penalty,
    /// Known number of change points; absent selects stability detection.
    pub k: Option<usize>,
    pub weighting: Weighting,
    pub pi_threshold: f64,
    pub seed: u64,
    pub encoder: EncoderMode,
    /// Quantile levels for the quantile encoder.
    pub lower: f64,
    pub upper: f64,
    /// Raw cut-offs for the quantile encoder; override the levels when set.
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Symbols of the pattern encoder, comma separated or one per character.
    pub pattern: Option<String>,
    pub bins: usize,
    pub smooth_window: Option<usize>,
    pub expand: bool,
    pub max_iter: usize,
    /// Include per-sequence segmentations in the result.
    pub verbose: bool,
    /// Include wall-clock timings (makes results differ between runs).
    pub timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            input: None,
            out: None,
            v: KMeansSpec::default().sequences,
            subsample_fraction: KMeansSpec::default().fraction,
            penalty: Penalty::Aic,
            k: None,
            weighting: p.weighting,
            pi_threshold: DEFAULT_PI,
            seed: 0,
            encoder: EncoderMode::Kmeans,
            lower: 0.05,
            upper: 0.95,
            alpha: None,
            beta: None,
            pattern: None,
            bins: DEFAULT_BINS,
            smooth_window: None,
            expand: p.expand,
            max_iter: DEFAULT_MAX_ITER,
            verbose: false,
            timings: false,
        }
    }
}

/// A subset of [`RunConfig`] settings, as found in a config file or on
/// the command line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigPatch {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    #[serde(rename = "V")]
    pub v: Option<usize>,
    pub subsample_fraction: Option<f64>,
    pub penalty: Option<Penalty>,
    pub k: Option<usize>,
    pub weighting: Option<Weighting>,
    pub pi_threshold: Option<f64>,
    pub seed: Option<u64>,
    pub encoder: Option<EncoderMode>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub pattern: Option<String>,
    pub bins: Option<usize>,
    pub smooth_window: Option<usize>,
    pub expand: Option<bool>,
    pub max_iter: Option<usize>,
    pub verbose: Option<bool>,
    pub timings: Option<bool>,
}

impl RunConfigPatch {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

macro_rules! overlay {
    ($cfg:expr, $patch:expr, plain: [$($p:ident),*], optional: [$($o:ident),*]) => {
        $(if let Some(v) = $patch.$p { $cfg.$p = v; })*
        $(if $patch.$o.is_some() { $cfg.$o = $patch.$o; })*
    };
}

impl RunConfig {
    /// Defaults, then the config file, then the flags.
    pub fn resolve(file: Option<RunConfigPatch>, flags: RunConfigPatch) -> Result<Self> {
        let mut cfg = Self::default();
        for patch in file.into_iter().chain(std::iter::once(flags)) {
            cfg.apply(patch);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, patch: RunConfigPatch) {
        overlay!(self, patch,
            plain: [v, subsample_fraction, penalty, weighting, pi_threshold, seed, encoder, lower, upper,
                    bins, expand, max_iter, verbose, timings],
            optional: [input, out, k, alpha, beta, pattern, smooth_window]);
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pi_threshold > 0.0 && self.pi_threshold < 1.0) {
            return Err(Error::Config(format!("pi_threshold must lie in (0, 1), got {}", self.pi_threshold)));
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be positive".into()));
        }
        if matches!(self.smooth_window, Some(w) if w % 2 == 0) {
            return Err(Error::Config("smooth_window must be odd".into()));
        }
        if self.encoder == EncoderMode::Pattern && self.pattern.is_none() {
            return Err(Error::Config("the pattern encoder needs a pattern".into()));
        }
        if self.alpha.is_some() != self.beta.is_some() {
            return Err(Error::Config("alpha and beta must be given together".into()));
        }
        self.kmeans().validate()
    }

    fn kmeans(&self) -> KMeansSpec {
        KMeansSpec {
            sequences: self.v,
            fraction: self.subsample_fraction,
            seed: self.seed,
        }
    }

    pub fn encoding(&self) -> EncodingSpec {
        match self.encoder {
            EncoderMode::Kmeans => EncodingSpec::KmeansSubsample(self.kmeans()),
            EncoderMode::Quantile => EncodingSpec::Quantile(match (self.alpha, self.beta) {
                (Some(alpha), Some(beta)) => Thresholds::Raw { alpha, beta },
                _ => Thresholds::Quantile {
                    lower: self.lower,
                    upper: self.upper,
                },
            }),
            EncoderMode::Pattern => {
                let p = self.pattern.as_deref().unwrap_or_default();
                let symbols = if p.contains(',') {
                    p.split(',').map(|s| s.trim().to_owned()).collect()
                } else {
                    p.chars().map(String::from).collect()
                };
                EncodingSpec::Pattern { pattern: symbols }
            }
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            encoding: self.encoding(),
            penalty: self.penalty,
            weighting: self.weighting,
            max_iter: self.max_iter,
            expand: self.expand,
            pi_threshold: self.pi_threshold,
            bins: self.bins,
            smooth_window: self.smooth_window,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub index: usize,
    pub ones: usize,
    pub change_points: Vec<usize>,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub detect_ms: f64,
}

/// Outcome of a detection run, written as a TOML document whose keys
/// always appear in declaration order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub tool: String,
    /// `known_k` or `stability`.
    pub mode: String,
    pub seed: u64,
    pub n: usize,
    pub sequences: usize,
    pub change_points: Vec<usize>,
    pub g_value: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub estimated_k: Option<usize>,
    pub windows: Option<Vec<[usize; 2]>>,
    pub weights: Vec<f64>,
    pub profile: Option<Vec<f64>>,
    pub config: RunConfig,
    pub timings: Option<Timings>,
    pub segmentations: Option<Vec<SequenceEntry>>,
}

impl ResultDocument {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("result document serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn sequence_entries<T: Scalar>(fits: &SequenceFits<T>) -> Vec<SequenceEntry> {
    fits.bundle
        .sequences
        .iter()
        .zip(&fits.segmentations)
        .enumerate()
        .map(|(i, (s, seg))| SequenceEntry {
            index: i + 1,
            ones: s.count_ones(),
            change_points: seg.change_points.clone(),
            loss: seg.loss.as_f64(),
        })
        .collect()
}

/// Runs detection on an in-memory series.
pub fn detect_series(series: &Series<f64>, config: &RunConfig) -> Result<(ResultDocument, Option<SelectionProfile<f64>>)> {
    config.validate()?;
    let pipeline = config.pipeline();
    let start = Instant::now();
    let base = |mode: &str, fits: &SequenceFits<f64>| ResultDocument {
        tool: format!("bmcp {}", env!("CARGO_PKG_VERSION")),
        mode: mode.into(),
        seed: config.seed,
        n: fits.bundle.series_len(),
        sequences: fits.bundle.len(),
        change_points: Vec::new(),
        g_value: None,
        iterations: None,
        converged: None,
        estimated_k: None,
        windows: None,
        weights: Vec::new(),
        profile: None,
        config: config.clone(),
        timings: None,
        segmentations: config.verbose.then(|| sequence_entries(fits)),
    };
    let (mut doc, profile) = match config.k {
        Some(k) => {
            let d = detect_known_k(series, k, &pipeline)?;
            let mut doc = base("known_k", &d.fits);
            doc.change_points = d.change_points;
            doc.g_value = Some(d.g_value);
            if config.weighting == Weighting::Iterative {
                doc.iterations = Some(d.iterations);
                doc.converged = Some(d.converged);
            }
            doc.weights = d.weights.into_inner();
            (doc, None)
        }
        None => {
            let d = detect_stability(series, &pipeline)?;
            let mut doc = base("stability", &d.fits);
            let mut cps = d.change_points.clone();
            cps.sort_unstable();
            doc.change_points = cps;
            doc.estimated_k = Some(d.estimated_k);
            doc.windows = Some(d.windows.iter().map(|&(a, b)| [a, b]).collect());
            doc.weights = d.weights.map(|w| w.into_inner()).unwrap_or_default();
            doc.profile = Some(d.profile.pi.clone());
            (doc, Some(d.profile))
        }
    };
    if config.timings {
        doc.timings = Some(Timings {
            detect_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok((doc, profile))
}

/// Reads the configured input, detects, and writes the result document
/// when an output path is configured.
pub fn run_detect(config: &RunConfig) -> Result<ResultDocument> {
    let input = config
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input file given".into()))?;
    let series = ingest_csv::<f64>(input)?;
    let (doc, _) = detect_series(&series, config)?;
    if let Some(out) = &config.out {
        write_atomic(out, doc.to_toml().as_bytes())?;
    }
    Ok(doc)
}

/// Optional companions of a profile CSV.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlotCompanions {
    pub bin_width: Option<usize>,
    pub smooth_window: Option<usize>,
}

/// `profile.csv` becomes `profile.<tag>.csv`.
pub fn companion_path(path: &Path, tag: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    path.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Writes `t,pi` rows, plus binned (`bin,start,end,mass,partial`) and
/// smoothed (`t,smoothed`) companions when requested. Values use the
/// shortest representation that reads back exactly.
pub fn emit_profile_plotdata<T: Scalar>(
    profile: &SelectionProfile<T>,
    path: &Path,
    companions: PlotCompanions,
) -> Result<Vec<PathBuf>> {
    let mut text = String::from("t,pi\n");
    for (i, v) in profile.pi.iter().enumerate() {
        let _ = writeln!(text, "{},{}", i + 1, v);
    }
    write_atomic(path, text.as_bytes())?;
    let mut written = vec![path.to_path_buf()];
    if let Some(width) = companions.bin_width {
        let binned = bin_profile(profile, width)?;
        let n = profile.len();
        let mut text = String::from("bin,start,end,mass,partial\n");
        for (i, m) in binned.sums.iter().enumerate() {
            let (a, b) = binned.range(i, n);
            let partial = binned.last_partial && i + 1 == binned.sums.len();
            let _ = writeln!(text, "{},{},{},{},{}", i + 1, a, b, m, partial);
        }
        let p = companion_path(path, "binned");
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    if let Some(window) = companions.smooth_window {
        if window == 0 || window % 2 == 0 {
            return Err(Error::Config(format!("smoothing window must be odd, got {window}")));
        }
        let mut text = String::from("t,smoothed\n");
        for (i, v) in smooth(&profile.pi, window).iter().enumerate() {
            let _ = writeln!(text, "{},{}", i + 1, v);
        }
        let p = companion_path(path, "smoothed");
        write_atomic(&p, text.as_bytes())?;
        written.push(p);
    }
    Ok(written)
}

/// Reads the `pi` column of a profile CSV.
pub fn read_profile_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut pi = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            line: i + 2,
            column: 0,
            message: e.to_string(),
        })?;
        let field = record.get(1).ok_or(Error::RaggedRows {
            row: i + 2,
            expected: 2,
            found: record.len(),
        })?;
        pi.push(field.parse().map_err(|_| Error::Parse {
            line: i + 2,
            column: 2,
            message: format!("'{field}' is not a number"),
        })?);
    }
    Ok(pi)
}
