//! Neural re-ranking of retrieved candidates.

pub mod loss;
pub mod network;
pub mod train;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{extract_into, ContextSignals, FeatureLayout, FeatureVector, ScalerStats};
use crate::index::{Candidate, PrefixIndex};
use crate::io;

pub use loss::{event_loss, EventLoss, PairwiseLoss};
pub use network::{sigmoid, Dense, Gradients, Network, HIDDEN_LAYERS};
pub use train::{pairwise_accuracy, train, EventSet, TrainConfig, TrainReport};

const MODEL_MAGIC: &[u8; 8] = b"QACMDL1\0";
const MODEL_FORMAT_VERSION: u32 = 1;

/// Anything that can score a candidate list in context. Higher is better.
pub trait CandidateScorer: Send + Sync {
    fn score_candidates(
        &self,
        index: &PrefixIndex,
        candidates: &[Candidate],
        context: &ContextSignals,
    ) -> Vec<f64>;
}

/// Candidates with their scores, best first. Equal scores keep retrieval
/// order.
pub fn rank_candidates(
    scorer: &dyn CandidateScorer,
    index: &PrefixIndex,
    candidates: &[Candidate],
    context: &ContextSignals,
) -> Vec<(Candidate, f64)> {
    let scores = scorer.score_candidates(index, candidates, context);
    let mut ranked: Vec<(Candidate, f64)> = candidates.iter().copied().zip(scores).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Keeps the retrieval order (exact first, then popularity): the ranking a
/// popularity-only production system would show.
#[derive(Clone, Copy, Debug, Default)]
pub struct RetrievalOrder;

impl CandidateScorer for RetrievalOrder {
    fn score_candidates(&self, _: &PrefixIndex, candidates: &[Candidate], _: &ContextSignals) -> Vec<f64> {
        (0..candidates.len()).map(|i| -(i as f64)).collect()
    }
}

/// A trained scorer: the network plus the scaler fitted on its training
/// features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankerModel {
    pub network: Network,
    pub scaler: ScalerStats,
    pub train_config: Option<TrainConfig>,
}

impl RankerModel {
    pub fn new(network: Network, scaler: ScalerStats) -> Result<Self> {
        if network.input_dim() != scaler.layout.dim() {
            return Err(Error::Dimension {
                expected: scaler.layout.dim(),
                got: network.input_dim(),
            });
        }
        Ok(RankerModel {
            network,
            scaler,
            train_config: None,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.scaler.layout
    }

    pub fn is_linear(&self) -> bool {
        self.network.layers().len() == 1
    }

    /// Score of an already standardized feature vector.
    pub fn score(&self, v: &FeatureVector) -> Result<f64> {
        self.layout().ensure_same(&v.layout)?;
        self.network.score(&v.values)
    }

    /// Raw (unscaled) features of every candidate, one row each.
    pub fn feature_matrix(
        layout: &FeatureLayout,
        index: &PrefixIndex,
        candidates: &[Candidate],
        context: &ContextSignals,
    ) -> Array2<f64> {
        let mut x = Array2::zeros((candidates.len(), layout.dim()));
        for (c, mut row) in candidates.iter().zip(x.rows_mut()) {
            extract_into(
                layout,
                index.query(c.query),
                c.is_exact_match,
                context,
                row.as_slice_mut().expect("contiguous row"),
            );
        }
        x
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        io::encode_container(MODEL_MAGIC, MODEL_FORMAT_VERSION, self)
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let model: RankerModel =
            io::decode_container(path, MODEL_MAGIC, MODEL_FORMAT_VERSION, bytes)?;
        let model = RankerModel {
            network: Network::from_layers(model.network.layers().to_vec())
                .map_err(|e| Error::format(path, e.to_string()))?,
            ..model
        };
        if model.network.input_dim() != model.layout().dim() || !model.network.is_finite() {
            return Err(Error::format(path, "model parameters do not match the feature layout"));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_bytes(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(path, &io::read_bytes(path)?)
    }

    /// Short content hash identifying this model.
    pub fn version_tag(&self) -> String {
        let digest = Sha256::digest(self.to_bytes());
        digest[..6].iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl CandidateScorer for RankerModel {
    fn score_candidates(
        &self,
        index: &PrefixIndex,
        candidates: &[Candidate],
        context: &ContextSignals,
    ) -> Vec<f64> {
        if candidates.is_empty() {
            return Vec::new();
        }
        let mut x = Self::feature_matrix(&self.layout(), index, candidates, context);
        self.scaler.apply_rows(x.view_mut());
        self.network.forward(x.view()).to_vec()
    }
}
