//! Offline metrics: MRR on held-out engagement (QAC) and on prefixes
//! simulated from general search logs.

mod experiment;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ContextSignals;
use crate::index::{Candidate, PrefixIndex, QueryId};
use crate::ranker::{rank_candidates, CandidateScorer};
use crate::sim::{DeviceType, QacEngagementEntry, SearchLogEntry};
use crate::synth::{sample_prefix, PrefixLengthDistribution};

pub use experiment::{
    format_table, run_mix_experiment, run_seed, BaselineData, CellResult, ExperimentConfig,
    ExperimentReport, ModelKind, SeedReport, Summary,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Qac,
    General,
}

/// What to evaluate on.
#[derive(Clone, Copy, Debug)]
pub enum EvalEvents<'a> {
    /// Re-rank each entry's shown list; the target is the click.
    Qac(&'a [QacEngagementEntry]),
    /// Sample a prefix per entry from `d` (seeded), retrieve and re-rank;
    /// the target is the logged query.
    General {
        logs: &'a [SearchLogEntry],
        d: &'a PrefixLengthDistribution,
        seed: u64,
    },
}

impl EvalEvents<'_> {
    pub fn mode(&self) -> EvalMode {
        match self {
            EvalEvents::Qac(_) => EvalMode::Qac,
            EvalEvents::General { .. } => EvalMode::General,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EvalEvents::Qac(e) => e.len(),
            EvalEvents::General { logs, .. } => logs.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub device_type: DeviceType,
    pub has_previous_query: bool,
    pub n_events: usize,
    pub mrr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub mrr: f64,
    pub slices: Vec<SliceReport>,
    /// Mean 1-based rank of the target over events where it was ranked.
    pub mean_click_position: Option<f64>,
    pub n_events: usize,
    pub n_target_missing: usize,
}

#[derive(Default)]
struct Tally {
    n: usize,
    rr: f64,
}

/// 1-based rank of `target` after ranking, if present.
fn target_rank(
    scorer: &dyn CandidateScorer,
    index: &PrefixIndex,
    candidates: &[Candidate],
    context: &ContextSignals,
    target: QueryId,
) -> Option<usize> {
    if candidates.is_empty() {
        return None;
    }
    rank_candidates(scorer, index, candidates, context)
        .iter()
        .position(|(c, _)| c.query == target)
        .map(|p| p + 1)
}

/// Mean reciprocal rank of the target under `scorer`. Targets that are not
/// among the candidates contribute 0 and are counted in `n_target_missing`.
pub fn evaluate(
    scorer: &dyn CandidateScorer,
    index: &PrefixIndex,
    events: EvalEvents<'_>,
    m: usize,
) -> Result<EvalReport> {
    if events.is_empty() {
        return Err(Error::Argument("no events to evaluate".into()));
    }
    if m == 0 {
        return Err(Error::Argument("m must be at least 1".into()));
    }
    let mut slices: BTreeMap<(usize, bool), Tally> = BTreeMap::new();
    let mut missing = 0;
    let mut positions = (0usize, 0usize);
    let mut record = |device: DeviceType, has_prev: bool, rank: Option<usize>| {
        let t = slices.entry((device.ordinal(), has_prev)).or_default();
        t.n += 1;
        match rank {
            Some(r) => {
                t.rr += 1.0 / r as f64;
                positions.0 += r;
                positions.1 += 1;
            }
            None => missing += 1,
        }
    };

    match events {
        EvalEvents::Qac(entries) => {
            for e in entries {
                let context = ContextSignals::resolve(
                    index,
                    &e.prefix,
                    e.device_type,
                    e.previous_query_text.as_deref(),
                    e.month,
                );
                let shown: Vec<Candidate> = e
                    .shown
                    .iter()
                    .filter_map(|t| index.lookup(t))
                    .map(|id| index.candidate_for(id, &e.prefix))
                    .collect();
                let rank = index
                    .lookup(&e.clicked)
                    .and_then(|t| target_rank(scorer, index, &shown, &context, t));
                record(e.device_type, context.has_previous(), rank);
            }
        }
        EvalEvents::General { logs, d, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cache: HashMap<String, Vec<Candidate>> = HashMap::new();
            for e in logs {
                let prefix = sample_prefix(&e.query_text, d, &mut rng);
                let context = ContextSignals::resolve(
                    index,
                    &prefix,
                    e.device_type,
                    e.previous_query_text.as_deref(),
                    e.month,
                );
                let rank = match index.lookup(&e.query_text) {
                    Some(target) if !prefix.is_empty() => {
                        if !cache.contains_key(&prefix) {
                            cache.insert(prefix.clone(), index.retrieve(&prefix, m)?);
                        }
                        target_rank(scorer, index, &cache[&prefix], &context, target)
                    }
                    _ => None,
                };
                record(e.device_type, context.has_previous(), rank);
            }
        }
    }

    let n_events = events.len();
    let total_rr: f64 = slices.values().map(|t| t.rr).sum();
    Ok(EvalReport {
        mode: events.mode(),
        mrr: total_rr / n_events as f64,
        slices: slices
            .into_iter()
            .map(|((device, has_prev), t)| SliceReport {
                device_type: DeviceType::ALL[device],
                has_previous_query: has_prev,
                n_events: t.n,
                mrr: t.rr / t.n as f64,
            })
            .collect(),
        mean_click_position: (positions.1 > 0).then(|| positions.0 as f64 / positions.1 as f64),
        n_events,
        n_target_missing: missing,
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            EvalMode::Qac => "MRR_QAC",
            EvalMode::General => "MRR_general",
        };
        writeln!(f, "{mode:<12} {:.4}  events {}  target missing {}", self.mrr, self.n_events, self.n_target_missing)?;
        if let Some(p) = self.mean_click_position {
            writeln!(f, "mean click position {p:.3}")?;
        }
        writeln!(f, "{:<16} {:>8} {:>8} {:>8}", "device", "prev", "events", "mrr")?;
        for s in &self.slices {
            writeln!(
                f,
                "{:<16} {:>8} {:>8} {:>8.4}",
                s.device_type.as_str(),
                if s.has_previous_query { "yes" } else { "no" },
                s.n_events,
                s.mrr
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::RetrievalOrder;
    use crate::sim::QueryRecord;

    fn index() -> PrefixIndex {
        PrefixIndex::build(vec![
            QueryRecord::new("black leather jacket", 0.9, 0, 0),
            QueryRecord::new("black leather boots", 0.5, 1, 0),
            QueryRecord::new("black leather gloves", 0.2, 0, 1),
            QueryRecord::new("blue jeans", 0.4, 1, 1),
        ])
        .unwrap()
    }

    fn engaged(shown: &[&str], clicked: &str, device: DeviceType) -> QacEngagementEntry {
        QacEngagementEntry {
            prefix: "black l".into(),
            shown: shown.iter().map(|s| s.to_string()).collect(),
            clicked: clicked.into(),
            clicked_rank: shown.iter().position(|s| *s == clicked).unwrap() + 1,
            session_id: "s".into(),
            previous_query_text: None,
            device_type: device,
            month: 1,
        }
    }

    #[test]
    fn ranks_one_and_four() {
        let index = PrefixIndex::build(vec![
            QueryRecord::new("aa", 0.9, 0, 0),
            QueryRecord::new("ab", 0.8, 0, 0),
            QueryRecord::new("ac", 0.7, 0, 0),
            QueryRecord::new("ad", 0.6, 0, 0),
        ])
        .unwrap();
        let mut e1 = engaged(&["aa", "ab", "ac", "ad"], "aa", DeviceType::IosApp);
        let mut e2 = engaged(&["aa", "ab", "ac", "ad"], "ad", DeviceType::DesktopBrowser);
        e1.prefix = "a".into();
        e2.prefix = "a".into();
        let r = evaluate(&RetrievalOrder, &index, EvalEvents::Qac(&[e1, e2]), 50).unwrap();
        assert_eq!(r.mrr, 0.625);
        assert_eq!(r.mean_click_position, Some(2.5));
        assert_eq!(r.slices.len(), 2);
    }

    #[test]
    fn perfect_ranker() {
        let index = index();
        let shown = ["black leather jacket", "black leather boots", "black leather gloves"];
        let events: Vec<_> = (0..5)
            .map(|_| engaged(&shown, "black leather jacket", DeviceType::IosApp))
            .collect();
        let r = evaluate(&RetrievalOrder, &index, EvalEvents::Qac(&events), 50).unwrap();
        assert_eq!(r.mrr, 1.0);
        assert_eq!(r.n_target_missing, 0);
    }

    #[test]
    fn general_target_never_retrieved() {
        let index = index();
        // Prefix "b" at m=1 retrieves only "black leather jacket".
        let d = PrefixLengthDistribution::from_pairs([(10, 1)], 0.0).unwrap();
        let logs: Vec<SearchLogEntry> = (0..4)
            .map(|i| SearchLogEntry {
                query_text: "blue jeans".into(),
                session_id: format!("s{i}"),
                previous_query_text: None,
                device_type: DeviceType::MobileBrowser,
                month: 2,
            })
            .collect();
        let r = evaluate(&RetrievalOrder, &index, EvalEvents::General { logs: &logs, d: &d, seed: 1 }, 1).unwrap();
        assert_eq!(r.mrr, 0.0);
        assert_eq!(r.n_target_missing, 4);
        assert_eq!(r.mean_click_position, None);
    }

    #[test]
    fn slices_reaggregate() {
        let index = index();
        let shown = ["black leather jacket", "black leather boots", "black leather gloves"];
        let mut events = Vec::new();
        for (i, device) in DeviceType::ALL.iter().enumerate() {
            let mut e = engaged(&shown, shown[i % 3], *device);
            if i % 2 == 0 {
                e.previous_query_text = Some("blue jeans".into());
            }
            events.push(e);
        }
        let r = evaluate(&RetrievalOrder, &index, EvalEvents::Qac(&events), 50).unwrap();
        let n: usize = r.slices.iter().map(|s| s.n_events).sum();
        assert_eq!(n, r.n_events);
        let weighted: f64 = r.slices.iter().map(|s| s.mrr * s.n_events as f64).sum::<f64>() / n as f64;
        assert!((weighted - r.mrr).abs() < 1e-12);
    }

    #[test]
    fn empty_events_rejected() {
        assert!(evaluate(&RetrievalOrder, &index(), EvalEvents::Qac(&[]), 50).is_err());
    }
}
