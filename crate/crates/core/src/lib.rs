//! Query autocomplete ranking.
//!
//! * [`index`]: popularity-ordered exact and fuzzy prefix retrieval.
//! * [`features`]: feature vectors and standardization.
//! * [`ranker`]: the feed-forward scorer, its pairwise event loss and Adam
//!   training.
//! * [`synth`]: prefix-length distribution, synthetic and real training
//!   instances, dataset mixing.
//! * [`eval`]: MRR evaluation and the training-mix experiment.
//! * [`sim`]: synthetic catalog, search logs and position-biased
//!   autocomplete sessions.
//! * [`service`]: the suggestion service, HTTP endpoint and latency bench.

pub mod error;
pub mod eval;
pub mod features;
pub mod index;
pub mod io;
pub mod ranker;
pub mod service;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
