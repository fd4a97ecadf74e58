mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use qac_core::eval::{evaluate, EvalEvents};
use qac_core::index::PrefixIndex;
use qac_core::ranker::RetrievalOrder;
use qac_core::sim::{DeviceType, QueryRecord};
use qac_core::synth::{
    build_real_instances, estimate_distribution, mix_datasets, mix_sizes, sample_prefix, MixRatio,
    PrefixLengthDistribution, TrainingInstance,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sampled_lengths_follow_the_fitted_pmf() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs: Vec<(usize, usize)> = (0..5000)
        .map(|_| {
            let s = rng.random_range(3..=25);
            let cap = 1 + rng.random_range(0..s);
            (s, rng.random_range(1..=cap))
        })
        .collect();
    let d = PrefixLengthDistribution::from_pairs(pairs, 0.5).unwrap();
    for s in [3, 8, 14, 25, 40] {
        let pmf = d.pmf(s);
        let n = 100_000;
        let mut hist = vec![0usize; s];
        for _ in 0..n {
            hist[d.sample_length(s, &mut rng) - 1] += 1;
        }
        let tv: f64 = 0.5
            * hist
                .iter()
                .zip(&pmf)
                .map(|(&h, &p)| (h as f64 / n as f64 - p).abs())
                .sum::<f64>();
        assert!(tv < 0.02, "s={s} tv={tv}");
    }
}

#[test]
fn hand_counted_distribution() {
    let entries = [
        common::engagement("ab", &["abcd", "abce"], 1, DeviceType::IosApp),
        common::engagement("abc", &["abcd"], 1, DeviceType::IosApp),
        common::engagement("a", &["abce", "abcd"], 2, DeviceType::IosApp),
        common::engagement("ab", &["abcd"], 1, DeviceType::IosApp),
    ];
    let d = estimate_distribution(&entries, 0.0).unwrap();
    assert_eq!(d.pmf(4), vec![0.25, 0.5, 0.25, 0.0]);
    let smoothed = estimate_distribution(&entries, 0.5).unwrap();
    assert_eq!(smoothed.pmf(4), vec![1.5 / 6.0, 2.5 / 6.0, 1.5 / 6.0, 0.5 / 6.0]);
}

#[test]
fn sampled_prefixes_are_character_prefixes() {
    let d = PrefixLengthDistribution::from_pairs([(5, 2), (6, 3), (9, 9)], 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for q in ["crème brûlée", "日本語の本", "shoes", "x"] {
        for _ in 0..50 {
            let p = sample_prefix(q, &d, &mut rng);
            assert!(!p.is_empty() && q.starts_with(&p), "{q} / {p}");
        }
    }
}

#[test]
fn real_instances_from_three_entries() {
    let mut second = common::engagement("nik", &["nike shoes", "nikon camera", "nike socks"], 3, DeviceType::DesktopBrowser);
    second.previous_query_text = Some("running shorts".into());
    let lone = common::engagement("zz", &["zzz"], 1, DeviceType::IosApp);
    let mut broken = common::engagement("ba", &["bag", "ball"], 1, DeviceType::IosApp);
    broken.clicked_rank = 2;
    let first = common::engagement("red", &["red dress", "red shoes"], 2, DeviceType::AndroidApp);
    let set = build_real_instances(&[first, second, lone, broken]);
    assert_eq!(
        set.instances,
        vec![
            TrainingInstance {
                prefix: "red".into(),
                device_type: DeviceType::AndroidApp,
                previous_query_text: None,
                month: 4,
                positive: "red shoes".into(),
                negatives: vec!["red dress".into()],
            },
            TrainingInstance {
                prefix: "nik".into(),
                device_type: DeviceType::DesktopBrowser,
                previous_query_text: Some("running shorts".into()),
                month: 4,
                positive: "nike socks".into(),
                negatives: vec!["nike shoes".into(), "nikon camera".into()],
            },
        ]
    );
    assert_eq!(set.skipped.no_negatives, 1);
    assert_eq!(set.skipped.inconsistent, 1);
}

fn instances(tag: &str, n: usize) -> Vec<TrainingInstance> {
    (0..n)
        .map(|i| TrainingInstance {
            prefix: "p".into(),
            device_type: DeviceType::IosApp,
            previous_query_text: None,
            month: 1,
            positive: format!("{tag}{i}"),
            negatives: vec!["n".into()],
        })
        .collect()
}

#[test]
fn balanced_mix_draws_half_from_each_source() {
    let real = instances("r", 600);
    let synthetic = instances("s", 1000);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mixed = mix_datasets(&real, &synthetic, MixRatio::BALANCED, &mut rng).unwrap();
    assert_eq!(mixed.len(), 1000);
    let from_real = mixed.iter().filter(|i| i.positive.starts_with('r')).count();
    assert_eq!(from_real, 500);
    let mut seen = BTreeMap::new();
    for i in &mixed {
        *seen.entry(&i.positive).or_insert(0) += 1;
    }
    assert!(seen.values().all(|&c| c == 1));
    assert!(mix_datasets(&[], &synthetic, MixRatio::BALANCED, &mut rng).is_err());
}

proptest! {
    #[test]
    fn mix_sizes_respect_ratio_and_sources(n_real in 1usize..5000, n_syn in 1usize..5000, r in 0.05f64..0.95) {
        let (a, b) = mix_sizes(n_real, n_syn, MixRatio::new(r).unwrap()).unwrap();
        prop_assert!(a <= n_real && b <= n_syn);
        prop_assert!(a + b <= n_real.max(n_syn) + 1);
        let got = a as f64 / (a + b) as f64;
        prop_assert!((got - r).abs() <= 1.0 / (a + b) as f64 + 1e-12, "{} vs {}", got, r);
    }
}

#[test]
fn mrr_matches_brute_force() {
    let (index, events) = common::fifty_events(&[DeviceType::IosApp]);
    let ranks = common::brute_force_ranks(&index, &events);
    let expected = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / 50.0;
    let report = evaluate(&common::Coarse, &index, EvalEvents::Qac(&events), 50).unwrap();
    assert_eq!(report.mrr, expected);
    assert_eq!(report.mean_click_position, Some(ranks.iter().sum::<usize>() as f64 / 50.0));
    assert_eq!(report.n_target_missing, 0);

    let (index, events) = common::fifty_events(&DeviceType::ALL);
    let ranks = common::brute_force_ranks(&index, &events);
    let expected = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / 50.0;
    let report = evaluate(&common::Coarse, &index, EvalEvents::Qac(&events), 50).unwrap();
    assert!((report.mrr - expected).abs() < 1e-15);
    assert_eq!(report.slices.len(), 4);
}

#[test]
fn two_event_fixture() {
    let index = PrefixIndex::build(vec![
        QueryRecord::new("aa", 0.9, 0, 0),
        QueryRecord::new("ab", 0.5, 0, 0),
        QueryRecord::new("ac", 0.4, 0, 0),
        QueryRecord::new("ad", 0.3, 0, 0),
    ])
    .unwrap();
    let events = [
        common::engagement("a", &["aa", "ab"], 1, DeviceType::IosApp),
        common::engagement("a", &["ab", "ac", "ad", "aa"], 4, DeviceType::IosApp),
    ];
    let shown_order = evaluate(&RetrievalOrder, &index, EvalEvents::Qac(&events), 50).unwrap();
    assert_eq!(shown_order.mrr, 0.625);
    let by_popularity = evaluate(&common::Coarse, &index, EvalEvents::Qac(&events), 50).unwrap();
    assert_eq!(by_popularity.mrr, 1.0);
}
