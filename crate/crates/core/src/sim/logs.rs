use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{BehaviorConfig, IntentModel, QueryRecord, SearchLogEntry};
use crate::error::{Error, Result};

/// Search sessions in which autocomplete was not used. Sessions have
/// geometric length; every query after the first records its predecessor.
pub fn simulate_search_logs(
    catalog: &[QueryRecord],
    behavior: &BehaviorConfig,
    n_entries: usize,
    month: u8,
    seed: u64,
) -> Result<Vec<SearchLogEntry>> {
    if catalog.is_empty() {
        return Err(Error::Config("cannot simulate search logs over an empty catalog".into()));
    }
    let mut intents = IntentModel::new(catalog, behavior, month)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(n_entries);
    let mut session = 0u64;

    while entries.len() < n_entries {
        session += 1;
        let session_id = format!("s{session:08}");
        let device = intents.sample_device(&mut rng);
        let mut previous = None;
        loop {
            let query = intents.sample(&mut rng, device, previous);
            entries.push(SearchLogEntry {
                query_text: catalog[query.index()].text.clone(),
                session_id: session_id.clone(),
                previous_query_text: previous.map(|p| catalog[p.index()].text.clone()),
                device_type: device,
                month,
            });
            previous = Some(query);
            if entries.len() == n_entries || !intents.continues(&mut rng) {
                break;
            }
        }
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::sim::{generate_catalog, CatalogConfig};

    fn flat_catalog(n: usize) -> Vec<QueryRecord> {
        // Seasonality is flat, so intent is proportional to popularity.
        generate_catalog(&CatalogConfig {
            n_queries: n,
            ..CatalogConfig::default()
        })
        .unwrap()
        .into_iter()
        .map(|mut q| {
            q.seasonal_boost = [1.0; 12];
            q
        })
        .collect()
    }

    #[test]
    fn singleton_catalog_forces_the_query() {
        let catalog = vec![QueryRecord::new("milk", 1.0, 0, 0)];
        let logs = simulate_search_logs(&catalog, &BehaviorConfig::default(), 5, 3, 1).unwrap();
        assert_eq!(logs.len(), 5);
        assert!(logs.iter().all(|e| e.query_text == "milk" && e.month == 3));
    }

    #[test]
    fn marginals_follow_popularity() {
        let catalog = flat_catalog(50);
        let logs =
            simulate_search_logs(&catalog, &BehaviorConfig::default(), 100_000, 6, 11).unwrap();
        let mut counts: HashMap<&str, f64> = HashMap::new();
        for e in &logs {
            *counts.entry(e.query_text.as_str()).or_default() += 1.0;
        }
        let total: f64 = catalog.iter().map(|q| q.popularity).sum();
        let tv: f64 = catalog
            .iter()
            .map(|q| {
                let empirical = counts.get(q.text.as_str()).copied().unwrap_or(0.0) / 1e5;
                (empirical - q.popularity / total).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.02, "total variation {tv}");
    }

    #[test]
    fn previous_query_shares_session() {
        let catalog = flat_catalog(200);
        let logs = simulate_search_logs(&catalog, &BehaviorConfig::default(), 2_000, 1, 3).unwrap();
        assert!(logs.iter().any(|e| e.previous_query_text.is_some()));
        for pair in logs.windows(2) {
            if let Some(prev) = &pair[1].previous_query_text {
                assert_eq!(pair[0].session_id, pair[1].session_id);
                assert_eq!(&pair[0].query_text, prev);
                assert_eq!(pair[0].device_type, pair[1].device_type);
            } else {
                assert_ne!(pair[0].session_id, pair[1].session_id);
            }
        }
    }

    #[test]
    fn deterministic() {
        let catalog = flat_catalog(300);
        let b = BehaviorConfig {
            department_affinity: 3.0,
            device_vertical_spread: 0.5,
            ..BehaviorConfig::default()
        };
        let x = simulate_search_logs(&catalog, &b, 3_000, 2, 9).unwrap();
        let y = simulate_search_logs(&catalog, &b, 3_000, 2, 9).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn empty_catalog_is_an_error() {
        assert!(simulate_search_logs(&[], &BehaviorConfig::default(), 5, 1, 1).is_err());
    }
}
