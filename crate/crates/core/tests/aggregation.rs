// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use bernoulli_mcp::aggregation::{chisq_at, constrained_hclust, g_statistic, max_chisq_scan, RateMatrix, DEFAULT_TRIM};
use bernoulli_mcp::encoder::{EncodedBundle, EncodingSpec, KMeansSpec, Series};
use bernoulli_mcp::simulation::{generate, ScenarioSpec, SegmentDistribution};
use bernoulli_mcp::{detect_known_k, BinarySeq, PipelineConfig};
use common::{direct_g, subsets};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bernoulli_bundle(rng: &mut ChaCha8Rng, v: usize, parts: &[(usize, f64)]) -> EncodedBundle<f64> {
    let seqs = (0..v)
        .map(|_| {
            BinarySeq::from_bools(
                parts
                    .iter()
                    .flat_map(|&(len, p)| (0..len).map(|_| rng.random::<f64>() < p).collect::<Vec<_>>()),
            )
            .unwrap()
        })
        .collect();
    EncodedBundle::from_sequences(seqs)
}

#[test]
fn ward_agrees_with_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 300;
    let mut agree = 0;
    for _ in 0..trials {
        let n = rng.random_range(6..=12);
        let v = rng.random_range(1..=3);
        let k = rng.random_range(1..=2);
        let cuts = subsets(n, k).swap_remove(rng.random_range(0..subsets(n, k).len()));
        let levels: Vec<Vec<f64>> = (0..=k).map(|_| (0..v).map(|_| rng.random::<f64>()).collect()).collect();
        let rows: Vec<Vec<f64>> = (1..=n)
            .map(|t| {
                let seg = cuts.partition_point(|&c| c < t);
                levels[seg].iter().map(|&x| x + 0.05 * rng.random::<f64>()).collect()
            })
            .collect();
        let m = RateMatrix::from_rows(&rows).unwrap();
        let best = subsets(n, k)
            .into_iter()
            .map(|c| (direct_g(&m, &c), c))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap();
        let found = constrained_hclust(&m, k).unwrap();
        if (found.g_value - best.0).abs() <= 1e-9 * best.0.max(1e-12) || found.change_points == best.1 {
            agree += 1;
        }
        assert!((g_statistic(&m, &found.change_points).unwrap() - found.g_value).abs() < 1e-9);
    }
    assert!(agree * 100 >= 90 * trials, "agreement {agree}/{trials}");
}

#[test]
fn chi_square_null_mean_matches_degrees_of_freedom() {
    let (n, v, seeds) = (200, 10, 1000);
    let mut total = 0.0;
    let mut df_total = 0usize;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bundle = bernoulli_bundle(&mut rng, v, &[(n, 0.2)]);
        let prefixes: Vec<Vec<usize>> = bundle.sequences.iter().map(|s| s.prefix_ones()).collect();
        df_total += prefixes.iter().filter(|p| p[n] > 0 && p[n] < n).count();
        total += chisq_at::<f64>(&prefixes, n / 2);
    }
    let mean = total / seeds as f64;
    let df = df_total as f64 / seeds as f64;
    assert!((mean - df).abs() <= 0.1 * df, "mean {mean} vs df {df}");
}

#[test]
fn chi_square_scan_finds_a_rate_flip() {
    let n = 400;
    let mut hits = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let bundle = bernoulli_bundle(&mut rng, 5, &[(n / 2, 0.1), (n / 2, 0.9)]);
        let scan = max_chisq_scan(&bundle, DEFAULT_TRIM).unwrap();
        if scan.tau.abs_diff(n / 2) as f64 <= 0.05 * n as f64 {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn two_mean_shifts_are_recovered_at_large_n() {
    let seg = 1000;
    let shifted = SegmentDistribution::Gaussian {
        mean: vec![3.0, 3.0],
        cov: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    };
    let seeds = 20;
    let mut hits = 0;
    for seed in 0..seeds {
        let spec = ScenarioSpec::new(
            vec![
                (SegmentDistribution::standard_normal(2), seg),
                (shifted.clone(), seg),
                (SegmentDistribution::standard_normal(2), seg),
            ],
            9000 + seed,
        );
        let series = Series::Numeric(generate::<f64>(&spec).unwrap());
        let cfg = PipelineConfig {
            encoding: EncodingSpec::KmeansSubsample(KMeansSpec { seed, ..KMeansSpec::default() }),
            ..PipelineConfig::default()
        };
        let found = detect_known_k(&series, 2, &cfg).unwrap().change_points;
        let tol = 0.05 * (3 * seg) as f64;
        if found.len() == 2 && found.iter().zip(spec.change_points()).all(|(&a, b)| a.abs_diff(b) as f64 <= tol) {
            hits += 1;
        }
    }
    assert!(hits * 10 >= 9 * seeds, "{hits}/{seeds}");
}
