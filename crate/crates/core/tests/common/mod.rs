#![allow(dead_code)]

use ndarray::Array2;
use qac_core::ranker::{event_loss, Network, PairwiseLoss};
use qac_core::ranker::EventSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use qac_core::features::ContextSignals;
use qac_core::index::{Candidate, PrefixIndex};
use qac_core::ranker::CandidateScorer;
use qac_core::sim::{DeviceType, QacEngagementEntry, QueryRecord};

/// Largest relative gap between the backpropagated gradient and central
/// differences with step `h`. Entries below 1e-5 in magnitude are compared
/// on an absolute 1e-5 scale: the output bias gradient of a pairwise loss is
/// exactly zero, and its difference quotient is pure rounding noise.
pub fn gradient_gap(network: &Network, rows: &Array2<f64>, kind: PairwiseLoss, h: f64) -> f64 {
    let analytic = event_loss(network, rows.view(), kind).gradient.flatten();
    let loss_at = |layers: Vec<qac_core::ranker::Dense>| {
        let net = Network::from_layers(layers).unwrap();
        event_loss(&net, rows.view(), kind).loss
    };
    let mut worst: f64 = 0.0;
    let mut k = 0;
    for l in 0..network.layers().len() {
        let layer = &network.layers()[l];
        let n_w = layer.weights.len();
        for i in 0..n_w + layer.bias.len() {
            let nudge = |delta: f64| {
                let mut layers = network.layers().to_vec();
                if i < n_w {
                    let idx = (i / layer.outputs(), i % layer.outputs());
                    layers[l].weights[idx] += delta;
                } else {
                    layers[l].bias[i - n_w] += delta;
                }
                loss_at(layers)
            };
            let numeric = (nudge(h) - nudge(-h)) / (2.0 * h);
            let a = analytic[k];
            let scale = a.abs().max(numeric.abs()).max(1e-5);
            worst = worst.max((a - numeric).abs() / scale);
            k += 1;
        }
    }
    assert_eq!(k, analytic.len());
    worst
}

/// A random network with layers of at most 8 units and one random event.
pub fn random_case(seed: u64) -> (Network, Array2<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=8);
    let depth = rng.random_range(0..=3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..=8)).collect();
    let mut network = Network::init(dim, &hidden, seed).unwrap();
    // Nonzero biases so every parameter has a gradient.
    let mut layers = network.layers().to_vec();
    for layer in &mut layers {
        layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        layer.weights.mapv_inplace(|w| w * 4.0);
    }
    network = Network::from_layers(layers).unwrap();
    let n = rng.random_range(2..=6);
    let rows = Array2::from_shape_fn((n, dim), |_| rng.random_range(-2.0..2.0));
    (network, rows)
}

/// Two features; the positive has a large first feature.
pub fn separable_events(n: usize, seed: u64) -> EventSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = EventSet::new(2);
    for _ in 0..n {
        let mut values = vec![rng.random_range(1.0..2.0), rng.random_range(-1.0..1.0)];
        for _ in 0..3 {
            values.push(rng.random_range(-2.0..0.5));
            values.push(rng.random_range(-1.0..1.0));
        }
        set.push(&values).unwrap();
    }
    set
}

/// The positive is the corner whose coordinates differ in sign; the negatives
/// are the two agreeing corners. No weight vector orders more than half of
/// the pairs.
pub fn xor_events(n: usize, seed: u64) -> EventSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jitter = || rng.random_range(-0.15..0.15);
    let mut set = EventSet::new(2);
    for i in 0..n {
        let pos = if i % 2 == 0 { [1.0, -1.0] } else { [-1.0, 1.0] };
        let values = [
            pos[0] + jitter(),
            pos[1] + jitter(),
            1.0 + jitter(),
            1.0 + jitter(),
            -1.0 + jitter(),
            -1.0 + jitter(),
        ];
        set.push(&values).unwrap();
    }
    set
}

pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut prev = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cur = row[j + 1];
            row[j + 1] = (prev + usize::from(ca != cb)).min(cur + 1).min(row[j] + 1);
            prev = cur;
        }
    }
    row[b.len()]
}

/// Straight from the definition: every query, classified and sorted.
pub fn brute_force(catalog: &[QueryRecord], prefix: &str, m: usize) -> Vec<(String, bool)> {
    let typed: Vec<char> = prefix.to_lowercase().chars().collect();
    let mut hits: Vec<(bool, f64, String)> = Vec::new();
    for q in catalog {
        let chars: Vec<char> = q.text.chars().collect();
        let exact = chars.starts_with(&typed);
        let fuzzy = (0..=chars.len()).any(|k| levenshtein(&chars[..k], &typed) <= 1);
        if exact || fuzzy {
            hits.push((exact, q.popularity, q.text.clone()));
        }
    }
    hits.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    hits.into_iter().take(m).map(|(e, _, t)| (t, e)).collect()
}


pub fn engagement(prefix: &str, shown: &[&str], clicked_rank: usize, device: DeviceType) -> QacEngagementEntry {
    QacEngagementEntry {
        prefix: prefix.into(),
        shown: shown.iter().map(|s| s.to_string()).collect(),
        clicked: shown[clicked_rank - 1].to_string(),
        clicked_rank,
        session_id: "s".into(),
        previous_query_text: None,
        device_type: device,
        month: 4,
    }
}

/// Scores by popularity rounded to one decimal, so some candidates tie.
pub struct Coarse;

impl CandidateScorer for Coarse {
    fn score_candidates(&self, _: &PrefixIndex, c: &[Candidate], _: &ContextSignals) -> Vec<f64> {
        c.iter().map(|c| (c.retrieval_score * 10.0).round()).collect()
    }
}

pub fn fifty_events(devices: &[DeviceType]) -> (PrefixIndex, Vec<QacEngagementEntry>) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let catalog: Vec<QueryRecord> = (0..40)
        .map(|i| QueryRecord::new(format!("item {i:02}"), rng.random_range(0.01..1.0), 0, 0))
        .collect();
    let index = PrefixIndex::build(catalog.clone()).unwrap();
    let events = (0..50)
        .map(|i| {
            let k = rng.random_range(1..=10);
            let mut shown: Vec<&str> = Vec::new();
            while shown.len() < k {
                let t = catalog[rng.random_range(0..40)].text.as_str();
                if !shown.contains(&t) {
                    shown.push(t);
                }
            }
            let click = rng.random_range(1..=k);
            engagement("item", &shown, click, devices[i % devices.len()])
        })
        .collect();
    (index, events)
}

/// Stable sort of the shown list by the coarse score; the click's position.
pub fn brute_force_ranks(index: &PrefixIndex, events: &[QacEngagementEntry]) -> Vec<usize> {
    events
        .iter()
        .map(|e| {
            let key = |t: &String| {
                let p = index.query(index.lookup(t).unwrap()).popularity;
                -(p * 10.0).round()
            };
            let mut order: Vec<&String> = e.shown.iter().collect();
            order.sort_by(|a, b| key(a).total_cmp(&key(b)));
            1 + order.iter().position(|t| **t == e.clicked).unwrap()
        })
        .collect()
}

