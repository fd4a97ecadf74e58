//! Pairwise approximation of the listwise objective.
//!
//! An event has exactly one positive and `n - 1` negatives, so the loss
//! `sum_j l(s_pos - s_neg_j)` has `n - 1` terms and its gradient with respect
//! to the scores is computed in one linear pass.

use ndarray::{Array1, ArrayView1, ArrayView2};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Gradients, Network};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseLoss {
    /// `log(1 + exp(-(s+ - s-)))`
    #[default]
    Logistic,
    /// `max(0, 1 - (s+ - s-))`
    Hinge,
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl PairwiseLoss {
    /// Loss of one pair with margin `s+ - s-`.
    pub fn value(self, margin: f64) -> f64 {
        match self {
            PairwiseLoss::Logistic => softplus(-margin),
            PairwiseLoss::Hinge => (1.0 - margin).max(0.0),
        }
    }

    /// Derivative of [`PairwiseLoss::value`] with respect to the margin.
    pub fn slope(self, margin: f64) -> f64 {
        match self {
            PairwiseLoss::Logistic => -super::network::sigmoid(-margin),
            PairwiseLoss::Hinge => {
                if margin < 1.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Loss and `d loss / d score` for one event whose positive is at index 0.
/// Returns the number of pairs alongside.
pub fn pairwise_scores(scores: ArrayView1<'_, f64>, kind: PairwiseLoss) -> (f64, Array1<f64>, usize) {
    let n = scores.len();
    let mut dscores = Array1::zeros(n);
    if n < 2 {
        return (0.0, dscores, 0);
    }
    let positive = scores[0];
    let mut loss = 0.0;
    let mut dpos = 0.0;
    for j in 1..n {
        let margin = positive - scores[j];
        loss += kind.value(margin);
        let slope = kind.slope(margin);
        dpos += slope;
        dscores[j] = -slope;
    }
    dscores[0] = dpos;
    (loss, dscores, n - 1)
}

#[derive(Clone, Debug)]
pub struct EventLoss {
    pub loss: f64,
    /// Number of (positive, negative) pairs, `rows - 1`.
    pub pairs: usize,
    pub gradient: Gradients,
}

/// Loss and parameter gradient of one event. `rows` holds the scaled feature
/// vectors with the positive first. An event without negatives contributes
/// zero loss, zero gradient and zero pairs.
pub fn event_loss(network: &Network, rows: ArrayView2<'_, f64>, kind: PairwiseLoss) -> EventLoss {
    if rows.nrows() < 2 {
        return EventLoss {
            loss: 0.0,
            pairs: 0,
            gradient: Gradients::zeros_like(network),
        };
    }
    let cache = network.forward_cached::<ChaCha8Rng>(rows.to_owned(), None);
    let (loss, dscores, pairs) = pairwise_scores(cache.scores.view(), kind);
    let gradient = network.backward(&cache, dscores.view());
    EventLoss {
        loss,
        pairs,
        gradient,
    }
}
