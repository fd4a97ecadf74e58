use std::time::{Duration, Instant};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{SuggestRequest, SuggestService};
use crate::error::{Error, Result};
use crate::sim::DeviceType;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n_requests: usize,
    pub concurrency: usize,
    /// Requests issued before measurement starts.
    pub warmup: usize,
    pub seed: u64,
    pub limit: usize,
    pub month: u8,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_requests: 10_000,
            concurrency: 1,
            warmup: 500,
            seed: 0,
            limit: 10,
            month: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub n_requests: usize,
    pub concurrency: usize,
    pub p50_micros: f64,
    pub p95_micros: f64,
    pub p99_micros: f64,
    pub max_micros: f64,
    pub throughput_per_sec: f64,
}

/// Nearest-rank percentile of sorted samples.
pub(crate) fn percentile(sorted: &[Duration], p: f64) -> Duration {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Requests for prefixes of catalog queries drawn by popularity.
fn workload(service: &SuggestService, config: &BenchConfig, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SuggestRequest>> {
    let snapshot = service
        .snapshot()
        .ok_or_else(|| Error::Unavailable("no index and model loaded".into()))?;
    let catalog = snapshot.index.catalog();
    let queries = WeightedIndex::new(catalog.iter().map(|q| q.popularity))
        .map_err(|e| Error::Config(format!("catalog popularity: {e}")))?;
    Ok((0..n)
        .map(|_| {
            let q = &catalog[queries.sample(rng)];
            let chars = q.text.chars().count();
            let k = rng.random_range(1..=chars.min(12));
            let previous = rng
                .random_bool(0.3)
                .then(|| catalog[queries.sample(rng)].text.clone());
            SuggestRequest {
                prefix: q.text.chars().take(k).collect(),
                device_type: DeviceType::ALL[rng.random_range(0..4)],
                previous_query: previous,
                month: Some(config.month),
                limit: config.limit,
            }
        })
        .collect())
}

/// Issue a seeded workload from `concurrency` threads and summarize
/// per-request latency.
pub fn bench_latency(service: &SuggestService, config: &BenchConfig) -> Result<LatencySummary> {
    if config.n_requests == 0 || config.concurrency == 0 {
        return Err(Error::Argument("n_requests and concurrency must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let warm = workload(service, config, config.warmup, &mut rng)?;
    for r in &warm {
        service.suggest(r)?;
    }
    let requests = workload(service, config, config.n_requests, &mut rng)?;

    let started = Instant::now();
    let per_thread: Vec<Result<Vec<Duration>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..config.concurrency)
            .map(|t| {
                let requests = &requests;
                scope.spawn(move || {
                    let mut out = Vec::with_capacity(requests.len() / config.concurrency + 1);
                    for r in requests.iter().skip(t).step_by(config.concurrency) {
                        let t0 = Instant::now();
                        service.suggest(r)?;
                        out.push(t0.elapsed());
                    }
                    Ok(out)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("bench thread")).collect()
    });
    let wall = started.elapsed();

    let mut latencies = Vec::with_capacity(config.n_requests);
    for r in per_thread {
        latencies.extend(r?);
    }
    latencies.sort();
    let micros = |d: Duration| d.as_secs_f64() * 1e6;
    Ok(LatencySummary {
        n_requests: latencies.len(),
        concurrency: config.concurrency,
        p50_micros: micros(percentile(&latencies, 50.0)),
        p95_micros: micros(percentile(&latencies, 95.0)),
        p99_micros: micros(percentile(&latencies, 99.0)),
        max_micros: micros(*latencies.last().unwrap()),
        throughput_per_sec: latencies.len() as f64 / wall.as_secs_f64(),
    })
}
