use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BehaviorConfig, IntentModel, QacEngagementEntry, SearchLogEntry};
use crate::error::{Error, Result};
use crate::features::ContextSignals;
use crate::index::{Candidate, PrefixIndex, QueryId};
use crate::ranker::{rank_candidates, CandidateScorer};

/// Rank-discounted examination: rank `r` is examined with probability
/// `examine_decay^(r-1)`, and an examined intended query is clicked with
/// probability `accept_if_intended`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClickModelConfig {
    pub examine_decay: f64,
    pub accept_if_intended: f64,
    pub rng_seed: u64,
}

impl Default for ClickModelConfig {
    fn default() -> Self {
        ClickModelConfig {
            examine_decay: 0.7,
            accept_if_intended: 0.9,
            rng_seed: 0,
        }
    }
}

impl ClickModelConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |p: f64| p > 0.0 && p <= 1.0;
        if unit(self.examine_decay) && unit(self.accept_if_intended) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "click model probabilities must be in (0, 1]: {self:?}"
            )))
        }
    }

    pub fn examine_probability(&self, rank: usize) -> f64 {
        self.examine_decay.powi(rank as i32 - 1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QacSimConfig {
    /// Engagement entries to produce.
    pub n_entries: usize,
    /// Candidates retrieved per keystroke.
    pub retrieve_m: usize,
    /// Suggestions shown to the user, taken from the top of the ranking.
    pub shown_limit: usize,
    pub month: u8,
    pub click_model: ClickModelConfig,
    pub behavior: BehaviorConfig,
}

impl Default for QacSimConfig {
    fn default() -> Self {
        QacSimConfig {
            n_entries: 1000,
            retrieve_m: 50,
            shown_limit: 10,
            month: 1,
            click_model: ClickModelConfig::default(),
            behavior: BehaviorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct QacSimulation {
    pub entries: Vec<QacEngagementEntry>,
    /// Users who never clicked; they completed their query by typing.
    pub abandoned: Vec<SearchLogEntry>,
    /// `exposures_by_rank[r - 1]`: keystrokes at which the intended query was
    /// shown at rank `r`.
    pub exposures_by_rank: Vec<u64>,
    /// `clicks_by_rank[r - 1]`: clicks at rank `r`.
    pub clicks_by_rank: Vec<u64>,
    pub users: u64,
}

// Retrieval results are cached per prefix; short prefixes dominate.
const RETRIEVAL_CACHE_LIMIT: usize = 200_000;

/// Simulate autocomplete users. Each user has an intended query and types it
/// one character at a time; at every keystroke the retrieved candidates are
/// ranked by `ranker`, the top `shown_limit` are shown, and the click model
/// decides whether the user selects the intended query. A click emits one
/// engagement entry and ends the user; a user who never clicks lands in
/// `abandoned`.
pub fn simulate_qac_sessions(
    index: &PrefixIndex,
    ranker: &dyn CandidateScorer,
    config: &QacSimConfig,
) -> Result<QacSimulation> {
    config.click_model.validate()?;
    if index.is_empty() {
        return Err(Error::Config("cannot simulate sessions over an empty catalog".into()));
    }
    if config.retrieve_m == 0 || config.shown_limit == 0 || config.shown_limit > config.retrieve_m {
        return Err(Error::Config(
            "need 1 <= shown_limit <= retrieve_m".into(),
        ));
    }
    let catalog = index.catalog();
    let mut intents = IntentModel::new(catalog, &config.behavior, config.month)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.click_model.rng_seed);
    let mut cache: HashMap<String, Vec<Candidate>> = HashMap::new();
    let mut sim = QacSimulation {
        exposures_by_rank: vec![0; config.shown_limit],
        clicks_by_rank: vec![0; config.shown_limit],
        ..QacSimulation::default()
    };
    let max_users = (config.n_entries as u64).saturating_mul(1000).max(1000);

    while sim.entries.len() < config.n_entries && sim.users < max_users {
        sim.users += 1;
        let session_id = format!("q{:08}", sim.users);
        let device = intents.sample_device(&mut rng);
        let previous = if intents.continues(&mut rng) {
            Some(intents.sample(&mut rng, device, None))
        } else {
            None
        };
        let intended = intents.sample(&mut rng, device, previous);
        let intended_text = &catalog[intended.index()].text;
        let previous_text = previous.map(|p| catalog[p.index()].text.clone());

        let mut clicked = None;
        let ends = intended_text
            .char_indices()
            .skip(1)
            .map(|(i, _)| i)
            .chain([intended_text.len()]);
        for end in ends {
            let prefix = &intended_text[..end];
            let candidates = retrieve_cached(index, &mut cache, prefix, config.retrieve_m)?;
            let mut context = ContextSignals::new(prefix, device, config.month);
            if let Some(p) = previous {
                context = context.with_previous(&catalog[p.index()]);
            }
            let ranked = rank_candidates(ranker, index, &candidates, &context);
            let shown: Vec<QueryId> = ranked
                .iter()
                .take(config.shown_limit)
                .map(|(c, _)| c.query)
                .collect();
            let Some(pos) = shown.iter().position(|&q| q == intended) else {
                continue;
            };
            let rank = pos + 1;
            sim.exposures_by_rank[pos] += 1;
            let examined = rng.random::<f64>() < config.click_model.examine_probability(rank);
            let accepted = rng.random::<f64>() < config.click_model.accept_if_intended;
            if examined && accepted {
                sim.clicks_by_rank[pos] += 1;
                clicked = Some((prefix.to_string(), shown, rank));
                break;
            }
        }

        match clicked {
            Some((prefix, shown, rank)) => sim.entries.push(QacEngagementEntry {
                prefix,
                shown: shown
                    .iter()
                    .map(|q| catalog[q.index()].text.clone())
                    .collect(),
                clicked: intended_text.clone(),
                clicked_rank: rank,
                session_id,
                previous_query_text: previous_text,
                device_type: device,
                month: config.month,
            }),
            None => sim.abandoned.push(SearchLogEntry {
                query_text: intended_text.clone(),
                session_id,
                previous_query_text: previous_text,
                device_type: device,
                month: config.month,
            }),
        }
    }
    Ok(sim)
}

fn retrieve_cached(
    index: &PrefixIndex,
    cache: &mut HashMap<String, Vec<Candidate>>,
    prefix: &str,
    m: usize,
) -> Result<Vec<Candidate>> {
    if let Some(hit) = cache.get(prefix) {
        return Ok(hit.clone());
    }
    let found = index.retrieve(prefix, m)?;
    if cache.len() < RETRIEVAL_CACHE_LIMIT {
        cache.insert(prefix.to_string(), found.clone());
    }
    Ok(found)
}
