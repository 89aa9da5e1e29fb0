// SPDX-License-Identifier: MIT OR Apache-2.0

use bernoulli_mcp::encoder::{EncodingSpec, KMeansSpec, Series};
use bernoulli_mcp::error::Error;
use bernoulli_mcp::io::{
    companion_path, detect_series, emit_profile_plotdata, parse_csv, read_profile_csv, PlotCompanions, RunConfigPatch,
};
use bernoulli_mcp::pipeline::detect_stability_top;
use bernoulli_mcp::simulation::{generate, ScenarioSpec};
use bernoulli_mcp::stability::{selection_profile, selection_set, SelectionProfile};
use bernoulli_mcp::{detect_known_k, detect_stability, run_detect, PipelineConfig, RunConfig, Weighting};

fn variance_series(seed: u64) -> Series<f64> {
    Series::Numeric(generate(&ScenarioSpec::variance_change(200, 4.0, seed)).unwrap())
}

fn to_csv(series: &Series<f64>) -> String {
    let Series::Numeric(s) = series else { unreachable!() };
    let mut text = String::from("x\n");
    for r in s.rows() {
        text.push_str(&format!("{}\n", r[0]));
    }
    text
}

#[test]
fn known_k_returns_k_points() {
    let series = variance_series(1);
    for weighting in [Weighting::None, Weighting::Simple, Weighting::Iterative] {
        let cfg = PipelineConfig { weighting, ..PipelineConfig::default() };
        let d = detect_known_k(&series, 2, &cfg).unwrap();
        assert_eq!(d.change_points.len(), 2);
        assert!(d.change_points.windows(2).all(|w| w[0] < w[1]));
        assert!((d.weights.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    assert!(matches!(
        detect_known_k(&series, 800, &PipelineConfig::default()),
        Err(Error::KTooLarge { .. })
    ));
}

#[test]
fn unweighted_profile_mass_is_mean_selection_size() {
    let series = variance_series(2);
    for expand in [false, true] {
        let cfg = PipelineConfig { weighting: Weighting::None, expand, ..PipelineConfig::default() };
        let d = detect_stability(&series, &cfg).unwrap();
        let sizes: usize = d
            .fits
            .bundle
            .sequences
            .iter()
            .zip(&d.fits.segmentations)
            .map(|(s, seg)| selection_set(s, seg, expand).members.len())
            .sum();
        let expected = sizes as f64 / d.fits.bundle.len() as f64;
        assert!((d.profile.total_mass() - expected).abs() < 1e-9);
        assert!(d.weights.is_none());
        assert_eq!(d.estimated_k, d.windows.len());
        assert_eq!(d.change_points.len(), d.estimated_k);
    }
}

#[test]
fn top_k_request_controls_reported_maxima() {
    let series = variance_series(3);
    let d = detect_stability_top(&series, &PipelineConfig::default(), Some(2)).unwrap();
    assert_eq!(d.change_points.len(), 2);
}

#[test]
fn single_precision_pipeline_runs() {
    let Series::Numeric(s) = variance_series(4) else { unreachable!() };
    let s32 = bernoulli_mcp::encoder::NumericSeries::<f32>::new(
        s.data().iter().map(|&v| v as f32).collect(),
        s.len(),
        1,
    )
    .unwrap();
    let cfg = PipelineConfig {
        encoding: EncodingSpec::KmeansSubsample(KMeansSpec::default()),
        ..PipelineConfig::default()
    };
    let d = detect_known_k(&Series::Numeric(s32), 2, &cfg).unwrap();
    assert_eq!(d.change_points.len(), 2);
}

#[test]
fn result_documents_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.csv");
    std::fs::write(&input, to_csv(&variance_series(5))).unwrap();
    let out = dir.path().join("result.toml");
    for k in [None, Some(2)] {
        let cfg = RunConfig { input: Some(input.clone()), out: Some(out.clone()), k, seed: 3, ..RunConfig::default() };
        run_detect(&cfg).unwrap();
        let first = std::fs::read(&out).unwrap();
        run_detect(&cfg).unwrap();
        assert_eq!(first, std::fs::read(&out).unwrap());
        let doc = bernoulli_mcp::ResultDocument::from_toml(std::str::from_utf8(&first).unwrap()).unwrap();
        assert_eq!(doc.config, cfg);
        assert_eq!(doc.n, 800);
    }
}

#[test]
fn in_memory_and_file_runs_agree() {
    let series = variance_series(6);
    let parsed = parse_csv::<f64>(&to_csv(&series)).unwrap();
    let cfg = RunConfig { k: Some(2), ..RunConfig::default() };
    let (a, _) = detect_series(&series, &cfg).unwrap();
    let (b, _) = detect_series(&parsed, &cfg).unwrap();
    assert_eq!(a.change_points, b.change_points);
}

#[test]
fn plot_data_rows_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let small = SelectionProfile::<f64> { pi: vec![0.1, 0.25, 1.0 / 3.0, 0.0, 0.7], v: 3, weighted: false };
    let path = dir.path().join("p.csv");
    let written = emit_profile_plotdata(&small, &path, PlotCompanions { bin_width: Some(2), smooth_window: Some(3) }).unwrap();
    assert_eq!(written.len(), 3);
    assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1 + 5);
    assert_eq!(read_profile_csv(&path).unwrap(), small.pi);
    let binned = std::fs::read_to_string(companion_path(&path, "binned")).unwrap();
    assert_eq!(binned.lines().count(), 1 + 3);
    assert!(binned.lines().last().unwrap().ends_with("true"));
    let smoothed = std::fs::read_to_string(companion_path(&path, "smoothed")).unwrap();
    assert_eq!(smoothed.lines().count(), 1 + 5);

    let series = variance_series(7);
    let d = detect_stability(&series, &PipelineConfig::default()).unwrap();
    let big = dir.path().join("big.csv");
    emit_profile_plotdata(&d.profile, &big, PlotCompanions { bin_width: Some(70), smooth_window: None }).unwrap();
    assert_eq!(read_profile_csv(&big).unwrap(), d.profile.pi);
    let rows = std::fs::read_to_string(companion_path(&big, "binned")).unwrap().lines().count() - 1;
    assert_eq!(rows, 800usize.div_ceil(70));
    assert!(emit_profile_plotdata(&small, &path, PlotCompanions { bin_width: None, smooth_window: Some(4) }).is_err());
}

#[test]
fn weighted_profile_equals_manual_sum() {
    let series = variance_series(8);
    let d = detect_stability(&series, &PipelineConfig::default()).unwrap();
    let sets: Vec<_> = d
        .fits
        .bundle
        .sequences
        .iter()
        .zip(&d.fits.segmentations)
        .map(|(s, seg)| selection_set(s, seg, true))
        .collect();
    let w = d.weights.as_ref().unwrap();
    let manual = selection_profile(&sets, Some(w)).unwrap();
    assert_eq!(manual, d.profile);
    let t = 400;
    let direct: f64 = sets.iter().zip(w.as_slice()).filter(|(s, _)| s.contains(t)).map(|(_, &x)| x).sum();
    assert!((d.profile.at(t) - direct).abs() < 1e-12);
}

#[test]
fn csv_errors_carry_positions() {
    assert!(matches!(parse_csv::<f64>(""), Err(Error::EmptyFile)));
    assert!(matches!(parse_csv::<f64>("a,b\n"), Err(Error::EmptyFile)));
    assert!(matches!(
        parse_csv::<f64>("1,2\n3\n"),
        Err(Error::RaggedRows { row: 2, expected: 2, found: 1 })
    ));
    assert!(matches!(parse_csv::<f64>("1,2\n3,\n"), Err(Error::RaggedRows { row: 2, .. })));
    assert!(matches!(
        parse_csv::<f64>("a,b\n1,2\n3,x\n"),
        Err(Error::Parse { line: 3, column: 2, .. })
    ));
    match parse_csv::<f64>("x,y\n1,2\n3,4\n").unwrap() {
        Series::Numeric(s) => {
            assert_eq!((s.len(), s.dim()), (2, 2));
            assert_eq!(s.names().unwrap(), ["x", "y"]);
        }
        Series::Categorical(_) => panic!("expected numeric"),
    }
    assert!(matches!(parse_csv::<f64>("A\nB\nA\n").unwrap(), Series::Categorical(c) if c.len() == 3));
}

#[test]
fn config_layers_override_in_order() {
    let file = RunConfigPatch::from_toml("V = 20\npenalty = \"bic\"\nseed = 4\n").unwrap();
    let flags = RunConfigPatch { seed: Some(9), ..RunConfigPatch::default() };
    let cfg = RunConfig::resolve(Some(file), flags).unwrap();
    assert_eq!((cfg.v, cfg.seed), (20, 9));
    assert_eq!(cfg.penalty, "bic".parse().unwrap());
    assert_eq!(cfg.bins, RunConfig::default().bins);
    assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert!(RunConfigPatch::from_toml("bogus = 1\n").is_err());
    let bad = RunConfigPatch { pi_threshold: Some(1.5), ..RunConfigPatch::default() };
    assert!(matches!(RunConfig::resolve(None, bad), Err(Error::Config(_))));
}
