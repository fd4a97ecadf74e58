//! Serving: retrieve, extract, score and sort suggestions against an
//! atomically replaceable snapshot of index and model.

mod bench;
mod http;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use arc_swap::ArcSwapOption;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ContextSignals, FeatureLayout};
use crate::index::PrefixIndex;
use crate::ranker::{rank_candidates, CandidateScorer, RankerModel};
use crate::sim::DeviceType;

pub use bench::{bench_latency, BenchConfig, LatencySummary};
pub use http::{router, serve, PORT_ENV};

/// Candidates retrieved per request before ranking.
pub const RETRIEVE_M: usize = 50;
pub const MAX_LIMIT: usize = RETRIEVE_M;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestRequest {
    pub prefix: String,
    pub device_type: DeviceType,
    pub previous_query: Option<String>,
    /// Month of year; the current month when absent.
    pub month: Option<u8>,
    pub limit: usize,
}

impl SuggestRequest {
    pub fn new(prefix: impl Into<String>, device_type: DeviceType) -> Self {
        SuggestRequest {
            prefix: prefix.into(),
            device_type,
            previous_query: None,
            month: None,
            limit: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub text: String,
    pub score: f64,
    pub is_exact_match: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuggestResponse {
    pub suggestions: Vec<Suggestion>,
    pub latency_micros: u64,
    pub model_version: String,
}

/// An immutable index and scorer pair.
pub struct Snapshot {
    pub index: PrefixIndex,
    pub scorer: Arc<dyn CandidateScorer>,
    pub model_version: String,
}

impl Snapshot {
    pub fn new(index: PrefixIndex, model: RankerModel) -> Result<Self> {
        FeatureLayout::for_catalog(index.catalog()).ensure_same(&model.layout())?;
        let model_version = model.version_tag();
        Ok(Snapshot {
            index,
            scorer: Arc::new(model),
            model_version,
        })
    }

    pub fn with_scorer(index: PrefixIndex, scorer: Arc<dyn CandidateScorer>, model_version: impl Into<String>) -> Self {
        Snapshot {
            index,
            scorer,
            model_version: model_version.into(),
        }
    }

    pub fn load(index_path: &Path, model_path: &Path) -> Result<Self> {
        let index = PrefixIndex::load(index_path)?;
        let model = RankerModel::load(model_path)?;
        Snapshot::new(index, model)
    }
}

pub fn current_month() -> u8 {
    time::OffsetDateTime::now_utc().month() as u8
}

/// Suggestion service. Requests read the current snapshot without locking;
/// [`SuggestService::install`] swaps in a new one atomically.
#[derive(Default)]
pub struct SuggestService {
    snapshot: ArcSwapOption<Snapshot>,
    sources: Option<(PathBuf, PathBuf)>,
}

impl SuggestService {
    pub fn new(snapshot: Snapshot) -> Self {
        SuggestService {
            snapshot: ArcSwapOption::from_pointee(snapshot),
            sources: None,
        }
    }

    /// A service that reloads from the files it was started with.
    pub fn from_files(index_path: impl Into<PathBuf>, model_path: impl Into<PathBuf>) -> Result<Self> {
        let (index_path, model_path) = (index_path.into(), model_path.into());
        let snapshot = Snapshot::load(&index_path, &model_path)?;
        Ok(SuggestService {
            snapshot: ArcSwapOption::from_pointee(snapshot),
            sources: Some((index_path, model_path)),
        })
    }

    pub fn install(&self, snapshot: Snapshot) {
        self.snapshot.store(Some(Arc::new(snapshot)));
    }

    /// Re-read index and model from their files and swap them in.
    pub fn reload(&self) -> Result<String> {
        let Some((index_path, model_path)) = &self.sources else {
            return Err(Error::Unavailable("service was not started from files".into()));
        };
        let snapshot = Snapshot::load(index_path, model_path)?;
        let version = snapshot.model_version.clone();
        self.install(snapshot);
        Ok(version)
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.load_full()
    }

    pub fn model_version(&self) -> Option<String> {
        self.snapshot.load().as_ref().map(|s| s.model_version.clone())
    }

    pub fn suggest(&self, request: &SuggestRequest) -> Result<SuggestResponse> {
        let started = Instant::now();
        if request.prefix.trim().is_empty() {
            return Err(Error::Argument("prefix must not be empty".into()));
        }
        if request.limit == 0 || request.limit > MAX_LIMIT {
            return Err(Error::Argument(format!(
                "limit must be in 1..={MAX_LIMIT}, got {}",
                request.limit
            )));
        }
        let month = request.month.unwrap_or_else(current_month);
        crate::sim::check_month(month)?;
        let guard = self.snapshot.load();
        let Some(snapshot) = guard.as_ref() else {
            return Err(Error::Unavailable("no index and model loaded".into()));
        };
        let index = &snapshot.index;
        let candidates = index.retrieve(&request.prefix, RETRIEVE_M)?;
        let context = ContextSignals::resolve(
            index,
            &request.prefix,
            request.device_type,
            request.previous_query.as_deref(),
            month,
        );
        let suggestions = rank_candidates(snapshot.scorer.as_ref(), index, &candidates, &context)
            .into_iter()
            .take(request.limit)
            .map(|(c, score)| Suggestion {
                text: index.query(c.query).text.clone(),
                score,
                is_exact_match: c.is_exact_match,
            })
            .collect();
        Ok(SuggestResponse {
            suggestions,
            latency_micros: started.elapsed().as_micros() as u64,
            model_version: snapshot.model_version.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ScalerStats;
    use crate::ranker::{Dense, Network, RetrievalOrder};
    use crate::sim::QueryRecord;

    fn index() -> PrefixIndex {
        PrefixIndex::build(vec![
            QueryRecord::new("black leather jacket", 0.9, 0, 0),
            QueryRecord::new("black leather boots", 0.5, 1, 0),
            QueryRecord::new("black leather gloves", 0.2, 0, 1),
            QueryRecord::new("red dress", 0.7, 1, 1),
        ])
        .unwrap()
    }

    /// Linear model scoring raw popularity.
    fn popularity_model() -> RankerModel {
        let layout = FeatureLayout::for_catalog(index().catalog());
        let mut layer = Dense::zeros(layout.dim(), 1);
        layer.weights[[0, 0]] = 1.0;
        RankerModel::new(Network::from_layers(vec![layer]).unwrap(), ScalerStats::identity(layout)).unwrap()
    }

    fn service() -> SuggestService {
        SuggestService::new(Snapshot::new(index(), popularity_model()).unwrap())
    }

    #[test]
    fn leather_jacket_first() {
        let r = service().suggest(&SuggestRequest::new("black l", DeviceType::IosApp)).unwrap();
        let texts: Vec<_> = r.suggestions.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["black leather jacket", "black leather boots", "black leather gloves"]);
        assert!(r.suggestions.windows(2).all(|w| w[0].score >= w[1].score));
        assert!(r.suggestions.iter().all(|s| s.is_exact_match));
    }

    #[test]
    fn no_match_is_empty() {
        let r = service().suggest(&SuggestRequest::new("zzz", DeviceType::IosApp)).unwrap();
        assert!(r.suggestions.is_empty());
    }

    #[test]
    fn limit_one() {
        let mut req = SuggestRequest::new("black", DeviceType::AndroidApp);
        req.limit = 1;
        assert_eq!(service().suggest(&req).unwrap().suggestions.len(), 1);
    }

    #[test]
    fn client_errors() {
        let s = service();
        assert!(matches!(s.suggest(&SuggestRequest::new("  ", DeviceType::IosApp)), Err(Error::Argument(_))));
        let mut req = SuggestRequest::new("b", DeviceType::IosApp);
        req.limit = 51;
        assert!(matches!(s.suggest(&req), Err(Error::Argument(_))));
        req.limit = 0;
        assert!(matches!(s.suggest(&req), Err(Error::Argument(_))));
    }

    #[test]
    fn uninitialized_is_unavailable() {
        let s = SuggestService::default();
        assert!(matches!(
            s.suggest(&SuggestRequest::new("b", DeviceType::IosApp)),
            Err(Error::Unavailable(_))
        ));
        assert!(s.reload().is_err());
        s.install(Snapshot::with_scorer(index(), Arc::new(RetrievalOrder), "retrieval"));
        assert_eq!(s.model_version().as_deref(), Some("retrieval"));
        assert!(s.suggest(&SuggestRequest::new("b", DeviceType::IosApp)).is_ok());
    }

    #[test]
    fn identical_requests_identical_orderings() {
        let s = service();
        let mut req = SuggestRequest::new("black leather", DeviceType::DesktopBrowser);
        req.previous_query = Some("red dress".into());
        req.month = Some(4);
        let a = s.suggest(&req).unwrap();
        let b = s.suggest(&req).unwrap();
        assert_eq!(a.suggestions, b.suggestions);
    }

    #[test]
    fn layout_mismatch_rejected() {
        let other = PrefixIndex::build(vec![QueryRecord::new("x", 1.0, 5, 0)]).unwrap();
        assert!(matches!(
            Snapshot::new(other, popularity_model()),
            Err(Error::LayoutMismatch { .. })
        ));
    }
}
