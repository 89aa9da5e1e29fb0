// SPDX-License-Identifier: MIT OR Apache-2.0

//! `bmcp`: command-line front end for Bernoulli-encoded change-point detection.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bernoulli_mcp::encoder::Series;
use bernoulli_mcp::experiment::{run_experiment, ExperimentGrid, Method, ScenarioKind};
use bernoulli_mcp::io::{
    detect_series, emit_profile_plotdata, ingest_csv, write_atomic, EncoderMode, PlotCompanions,
    ResultDocument, RunConfig, RunConfigPatch,
};
use bernoulli_mcp::simulation::{ari, rand_index, PartitionLabels};
use bernoulli_mcp::stability::{bin_width_for, default_smooth_window, error_bounds, ErrorBoundInputs};
use bernoulli_mcp::{Error, ErrorClass, Penalty, Weighting};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bmcp", version, about = "Nonparametric multiple change-point detection via Bernoulli encoding")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect change points and write a result document.
    Detect(RunArgs),
    /// Compute the selection profile and write it as plot data.
    Stability(StabilityArgs),
    /// Run a replicated simulation experiment.
    Simulate(SimulateArgs),
    /// Compare two change-point sets with the (adjusted) Rand index.
    Evaluate(EvaluateArgs),
    /// Evaluate the false positive / false negative rate bounds.
    Bounds(BoundsArgs),
}

#[derive(Args, Default)]
struct RunArgs {
    /// TOML file with any subset of the settings below; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of encoded sequences.
    #[arg(long = "V")]
    v: Option<usize>,
    #[arg(long)]
    subsample_fraction: Option<f64>,
    /// aic, bic, or a penalty coefficient.
    #[arg(long)]
    penalty: Option<Penalty>,
    /// Known number of change points.
    #[arg(long)]
    k: Option<usize>,
    /// none, simple or iterative.
    #[arg(long)]
    weighting: Option<Weighting>,
    #[arg(long, visible_alias = "pi")]
    pi_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// kmeans, quantile or pattern.
    #[arg(long)]
    encoder: Option<EncoderMode>,
    #[arg(long)]
    lower: Option<f64>,
    #[arg(long)]
    upper: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long)]
    pattern: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long)]
    expand: Option<bool>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    verbose: bool,
    #[arg(long)]
    timings: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(p) => Some(RunConfigPatch::from_toml(&read(p)?)?),
            None => None,
        };
        let flags = RunConfigPatch {
            input: self.input.clone(),
            out: self.out.clone(),
            v: self.v,
            subsample_fraction: self.subsample_fraction,
            penalty: self.penalty,
            k: self.k,
            weighting: self.weighting,
            pi_threshold: self.pi_threshold,
            seed: self.seed,
            encoder: self.encoder,
            lower: self.lower,
            upper: self.upper,
            alpha: self.alpha,
            beta: self.beta,
            pattern: self.pattern.clone(),
            bins: self.bins,
            smooth_window: self.smooth_window,
            expand: self.expand,
            max_iter: self.max_iter,
            verbose: self.verbose.then_some(true),
            timings: self.timings.then_some(true),
        };
        Ok(RunConfig::resolve(file, flags)?)
    }
}

#[derive(Args)]
struct StabilityArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Also write the result document here.
    #[arg(long)]
    result: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment grid file; flags below fill a single-cell grid instead.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario name, e.g. variance_change, tail_change, correlation_change,
    /// full_correlation_change, band_correlation_change, alternating3, alternating7.
    #[arg(long)]
    scenario: Option<ScenarioKind>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Standard deviation of the middle segment (variance_change).
    #[arg(long)]
    sigma: Option<f64>,
    /// Degrees of freedom of the middle segment (tail_change).
    #[arg(long)]
    df: Option<f64>,
    /// Correlation of the changed segments (correlation and alternating scenarios).
    #[arg(long)]
    rho: Option<f64>,
    /// Dimension (correlation scenarios).
    #[arg(long, default_value_t = 10)]
    d: usize,
    #[arg(long, default_value = "simple")]
    method: Method,
    #[arg(long, default_value_t = 100)]
    replicates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "V", default_value_t = 50)]
    v: usize,
    #[arg(long, default_value = "aic")]
    penalty: Penalty,
    /// CSV table; the aligned text table goes to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Comma-separated true change points.
    #[arg(long, value_delimiter = ',', required = true)]
    truth: Vec<usize>,
    /// Comma-separated detected change points.
    #[arg(long, value_delimiter = ',', conflicts_with = "result")]
    detected: Vec<usize>,
    /// Take the detected change points from a result document.
    #[arg(long)]
    result: Option<PathBuf>,
    /// Series length; defaults to the one in the result document.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long)]
    pn: f64,
    #[arg(long)]
    pa: f64,
    #[arg(long)]
    xi: f64,
    #[arg(long)]
    pi: f64,
    #[arg(long = "V")]
    v: usize,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load(config: &RunConfig) -> Result<Series<f64>> {
    let input = config.input.as_deref().ok_or_else(|| Error::Config("no input file given (--input)".into()))?;
    ingest_csv(input).with_context(|| format!("reading {}", input.display()))
}

fn emit(doc: &ResultDocument, out: Option<&Path>) -> Result<()> {
    let text = doc.to_toml();
    match out {
        Some(p) => write_atomic(p, text.as_bytes()).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn detect(args: RunArgs) -> Result<()> {
    let config = args.resolve()?;
    let series = load(&config)?;
    let (doc, _) = detect_series(&series, &config)?;
    emit(&doc, config.out.as_deref())
}

fn stability(args: StabilityArgs) -> Result<()> {
    let mut config = args.run.resolve()?;
    config.k = None;
    let series = load(&config)?;
    let (doc, profile) = detect_series(&series, &config)?;
    let profile = profile.expect("stability mode yields a profile");
    match &config.out {
        Some(out) => {
            let n = profile.len();
            let companions = PlotCompanions {
                bin_width: Some(bin_width_for(n, config.bins)),
                smooth_window: Some(config.smooth_window.unwrap_or_else(|| default_smooth_window(n))),
            };
            for p in emit_profile_plotdata(&profile, out, companions)? {
                eprintln!("wrote {}", p.display());
            }
        }
        None => {
            println!("t,pi");
            for (i, v) in profile.pi.iter().enumerate() {
                println!("{},{}", i + 1, v);
            }
        }
    }
    if let Some(p) = &args.result {
        emit(&doc, Some(p))?;
    }
    eprintln!(
        "estimated change points: {} at {:?}; windows above {}: {:?}",
        doc.estimated_k.unwrap_or(0),
        doc.change_points,
        config.pi_threshold,
        doc.windows.unwrap_or_default()
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let grid = match &args.config {
        Some(p) => ExperimentGrid::from_toml(&read(p)?)?,
        None => {
            let scenario = args
                .scenario
                .ok_or_else(|| Error::Config("--scenario or --config is required".into()))?;
            let param = match scenario {
                ScenarioKind::VarianceChange => args.sigma,
                ScenarioKind::TailChange => args.df,
                _ => args.rho,
            }
            .ok_or_else(|| Error::Config("the scenario parameter (--sigma, --df or --rho) is required".into()))?;
            if args.n.is_empty() {
                return Err(Error::Config("--n is required".into()).into());
            }
            let grid = ExperimentGrid {
                scenario,
                sizes: args.n.clone(),
                params: vec![param],
                dim: args.d,
                method: args.method,
                replicates: args.replicates,
                seed: args.seed,
                sequences: args.v,
                fraction: 0.1,
                penalty: args.penalty,
            };
            grid.validate()?;
            grid
        }
    };
    let table = run_experiment(&grid)?;
    print!("{}", table.to_text());
    if let Some(out) = &args.out {
        write_atomic(out, table.to_csv().as_bytes()).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let (detected, doc_n) = match &args.result {
        Some(p) => {
            let doc = ResultDocument::from_toml(&read(p)?)?;
            (doc.change_points, Some(doc.n))
        }
        None => (args.detected.clone(), None),
    };
    let n = args
        .n
        .or(doc_n)
        .ok_or_else(|| Error::Config("--n is required without --result".into()))?;
    for &cp in args.truth.iter().chain(&detected) {
        if cp == 0 || cp >= n {
            return Err(Error::InvalidChangePoints(format!("change point {cp} is outside (0, {n})")).into());
        }
    }
    let a = PartitionLabels::from_change_points(&args.truth, n);
    let b = PartitionLabels::from_change_points(&detected, n);
    println!("ari = {}", ari(&a, &b)?);
    println!("rand_index = {}", rand_index(&a, &b)?);
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let b = error_bounds(&ErrorBoundInputs {
        p_noise: args.pn,
        p_admissive: args.pa,
        xi: args.xi,
        pi_threshold: args.pi,
        v: args.v,
    });
    let show = |name: &str, r: &bernoulli_mcp::Result<f64>| match r {
        Ok(v) => println!("{name} = {v}"),
        Err(e) => println!("{name} = not applicable ({e})"),
    };
    show("fpr_bound", &b.fpr);
    show("fnr_bound", &b.fnr);
    match (b.fpr, b.fnr) {
        (Err(e), Err(_)) => Err(e.into()),
        _ => Ok(()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let class = err.chain().find_map(|e| e.downcast_ref::<Error>()).map(Error::class);
    match class {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Numerical) => 4,
        Some(ErrorClass::Data) | None => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Detect(a) => detect(a),
        Command::Stability(a) => stability(a),
        Command::Simulate(a) => simulate(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Bounds(a) => bounds(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
