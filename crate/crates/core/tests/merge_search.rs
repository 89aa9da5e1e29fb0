// SPDX-License-Identifier: MIT OR Apache-2.0

mod common;

use bernoulli_mcp::bernoulli::{merge_search_with_stats, parameter_count};
use bernoulli_mcp::{merge_search, penalized_loss, BinarySeq, Penalty};
use common::{direct_loss, one_positions, oracle_min_loss, random_seq};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bernoulli_block<R: Rng>(rng: &mut R, parts: &[(usize, f64)]) -> BinarySeq {
    BinarySeq::from_bools(
        parts
            .iter()
            .flat_map(|&(len, p)| (0..len).map(|_| rng.random::<f64>() < p).collect::<Vec<_>>()),
    )
    .unwrap()
}

#[test]
fn hand_evaluated_loss_difference() {
    let seq = BinarySeq::new(vec![1, 0, 1, 0, 0, 0, 0, 0]).unwrap();
    // With a change at 4: p1 = 1/2 on four points, p2 = 0 on four points.
    let with: f64 = penalized_loss(&seq, &[4], 0.0).unwrap();
    let expected_with = -2.0 * (4.0 * 0.5_f64.ln());
    // Without: p = 1/4 on eight points.
    let without: f64 = penalized_loss(&seq, &[], 0.0).unwrap();
    let expected_without = -2.0 * (2.0 * 0.25_f64.ln() + 6.0 * 0.75_f64.ln());
    assert!((with - expected_with).abs() < 1e-12);
    assert!((without - expected_without).abs() < 1e-12);
    assert!((without - with - (expected_without - expected_with)).abs() < 1e-12);
    assert_eq!(parameter_count(1), 3);
}

#[test]
fn locates_a_rate_jump() {
    let mut hits = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = bernoulli_block(&mut rng, &[(50, 0.05), (50, 0.6)]);
        if seq.count_ones() == 0 {
            continue;
        }
        let seg = merge_search::<f64>(&seq, Penalty::Aic.coefficient(100));
        if seg.change_points.iter().any(|&c| c.abs_diff(50) <= 5) {
            hits += 1;
        }
    }
    assert!(hits >= 180, "change within 5 of 50 in {hits}/200 seeds");
}

#[test]
fn tiny_sequences_match_the_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut ok = 0;
    let trials = 400;
    for _ in 0..trials {
        let n = rng.random_range(2..=20);
        let ones = rng.random_range(1..=n.min(6));
        let seq = random_seq(&mut rng, n, ones);
        let found = merge_search::<f64>(&seq, 2.0).loss;
        if found <= oracle_min_loss(seq.values(), &one_positions(seq.values()), 2.0) + 1e-9 {
            ok += 1;
        }
    }
    assert!(ok * 100 >= 95 * trials, "{ok}/{trials}");
}

#[test]
fn merge_events_grow_quadratically_at_most() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(n, m) in &[(200, 20), (400, 40), (800, 80), (1600, 160)] {
        let seq = random_seq(&mut rng, n, m);
        let (_, stats) = merge_search_with_stats::<f64>(&seq, 2.0);
        let bound = 4 * (m + 1) * (m + 1);
        assert!(stats.merge_events <= bound, "{} events for M={m}", stats.merge_events);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn search_never_loses_to_the_null_model(v in prop::collection::vec(0u8..=1, 1..120), phi in 0.0f64..8.0) {
        let seq = BinarySeq::new(v).unwrap();
        let seg = merge_search::<f64>(&seq, phi);
        let null: f64 = penalized_loss(&seq, &[], phi).unwrap();
        prop_assert!(seg.loss <= null + 1e-9);
    }

    #[test]
    fn reported_loss_is_the_loss_of_the_reported_change_points(v in prop::collection::vec(0u8..=1, 2..120)) {
        let seq = BinarySeq::new(v).unwrap();
        let seg = merge_search::<f64>(&seq, 2.0);
        let direct = direct_loss(seq.values(), &seg.change_points, 2.0);
        prop_assert!((seg.loss - direct).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn change_points_sit_on_ones(v in prop::collection::vec(0u8..=1, 2..120)) {
        let seq = BinarySeq::new(v).unwrap();
        let seg = merge_search::<f64>(&seq, 2.0);
        for &c in &seg.change_points {
            prop_assert!(c >= 1 && c < seq.len());
            prop_assert!(seq.get(c) == 1 || seq.get(c + 1) == 1, "{} not adjacent to a 1", c);
        }
        prop_assert!(seg.change_points.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn search_is_deterministic(v in prop::collection::vec(0u8..=1, 1..120)) {
        let seq = BinarySeq::new(v).unwrap();
        prop_assert_eq!(merge_search::<f64>(&seq, 2.0), merge_search::<f64>(&seq, 2.0));
    }
}
