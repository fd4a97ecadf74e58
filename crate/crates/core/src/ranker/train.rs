use ndarray::{s, Array2, ArrayView2, Zip};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{pairwise_scores, PairwiseLoss};
use super::network::{Dense, Gradients, Network};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Events per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout_rate: f64,
    pub l2_weight: f64,
    pub epochs: usize,
    pub pairwise_loss: PairwiseLoss,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 1280,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout_rate: 0.1,
            l2_weight: 1e-5,
            epochs: 10,
            pairwise_loss: PairwiseLoss::Logistic,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size >= 1
            && self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && (0.0..1.0).contains(&self.dropout_rate)
            && self.l2_weight >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration {self:?}")))
        }
    }
}

/// Encoded ranking events: one feature matrix with the rows of every event
/// stored contiguously, positive first.
#[derive(Clone, Debug, PartialEq)]
pub struct EventSet {
    dim: usize,
    rows: Vec<f64>,
    offsets: Vec<usize>,
}

impl EventSet {
    pub fn new(dim: usize) -> Self {
        EventSet {
            dim,
            rows: Vec::new(),
            offsets: vec![0],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total_rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Append an event given as `n x dim` row-major values, positive first.
    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if values.is_empty() || !values.len().is_multiple_of(self.dim) {
            return Err(Error::Dimension {
                expected: self.dim,
                got: values.len(),
            });
        }
        self.rows.extend_from_slice(values);
        self.offsets.push(self.rows.len() / self.dim);
        Ok(())
    }

    pub fn event(&self, i: usize) -> ArrayView2<'_, f64> {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        ArrayView2::from_shape((b - a, self.dim), &self.rows[a * self.dim..b * self.dim])
            .expect("event rows")
    }

    /// All rows as one matrix.
    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.total_rows(), self.dim), &self.rows).expect("rows")
    }

    pub(crate) fn rows_mut(&mut self) -> ndarray::ArrayViewMut2<'_, f64> {
        let n = self.total_rows();
        ndarray::ArrayViewMut2::from_shape((n, self.dim), &mut self.rows).expect("rows")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean pairwise loss per event for each epoch (without the L2 term).
    pub epoch_losses: Vec<f64>,
    /// Events without negatives, counted once per epoch.
    pub skipped_events: usize,
    pub steps: usize,
}

// Bounds the activation memory of one forward/backward pass.
const MAX_CHUNK_ROWS: usize = 16_384;

struct Adam {
    first: Gradients,
    second: Gradients,
    step: i32,
}

impl Adam {
    fn new(network: &Network) -> Self {
        Adam {
            first: Gradients::zeros_like(network),
            second: Gradients::zeros_like(network),
            step: 0,
        }
    }

    fn update(&mut self, network: &mut Network, grads: &Gradients, config: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (config.beta1, config.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = config.learning_rate;
        let eps = config.epsilon;
        let apply = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *param -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        let layers = network.layers_mut().iter_mut();
        for (((layer, g), m), v) in layers
            .zip(&grads.layers)
            .zip(&mut self.first.layers)
            .zip(&mut self.second.layers)
        {
            let Dense { weights, bias } = layer;
            Zip::from(weights)
                .and(&g.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
            Zip::from(bias)
                .and(&g.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .for_each(|p, &g, m, v| apply(p, g, m, v));
        }
    }
}

/// Mini-batch Adam on the pairwise event loss. Batches are averaged over
/// their events; `0.5 * l2_weight * |W|^2` is added for weight matrices only.
pub fn train(network: &mut Network, data: &EventSet, config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Argument("training set is empty".into()));
    }
    if data.dim() != network.input_dim() {
        return Err(Error::Dimension {
            expected: network.input_dim(),
            got: data.dim(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(network);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..data.len()).filter(|&i| data.event(i).nrows() >= 2).collect();
    let skipped = data.len() - order.len();
    if order.is_empty() {
        return Err(Error::Argument("no event has a negative".into()));
    }

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        report.skipped_events += skipped;
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = Gradients::zeros_like(network);
            let mut batch_loss = 0.0;
            for chunk in row_chunks(data, batch) {
                let (loss, g) = chunk_gradient(network, data, chunk, config, &mut rng);
                batch_loss += loss;
                grads.add_assign(&g);
            }
            epoch_loss += batch_loss;
            grads.scale(1.0 / batch.len() as f64);
            if config.l2_weight > 0.0 {
                for (g, layer) in grads.layers.iter_mut().zip(network.layers()) {
                    g.weights.scaled_add(config.l2_weight, &layer.weights);
                }
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    detail: format!("batch loss {batch_loss}"),
                });
            }
            adam.update(network, &grads, config);
            report.steps += 1;
        }
        if !network.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: 0,
                detail: "non-finite parameters after epoch".into(),
            });
        }
        report.epoch_losses.push(epoch_loss / order.len() as f64);
    }
    Ok(report)
}

fn row_chunks<'a>(data: &EventSet, batch: &'a [usize]) -> Vec<&'a [usize]> {
    let mut chunks = Vec::new();
    let mut start = 0;
    let mut rows = 0;
    for (i, &e) in batch.iter().enumerate() {
        let n = data.event(e).nrows();
        if rows + n > MAX_CHUNK_ROWS && i > start {
            chunks.push(&batch[start..i]);
            start = i;
            rows = 0;
        }
        rows += n;
    }
    chunks.push(&batch[start..]);
    chunks
}

fn chunk_gradient(
    network: &Network,
    data: &EventSet,
    events: &[usize],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> (f64, Gradients) {
    let total: usize = events.iter().map(|&e| data.event(e).nrows()).sum();
    let mut x = Array2::zeros((total, data.dim()));
    let mut at = 0;
    for &e in events {
        let rows = data.event(e);
        x.slice_mut(s![at..at + rows.nrows(), ..]).assign(&rows);
        at += rows.nrows();
    }
    let cache = network.forward_cached(x, Some((config.dropout_rate, rng)));
    let mut dscores = ndarray::Array1::zeros(total);
    let mut loss = 0.0;
    let mut at = 0;
    for &e in events {
        let n = data.event(e).nrows();
        let (l, d, _) = pairwise_scores(cache.scores.slice(s![at..at + n]), config.pairwise_loss);
        loss += l;
        dscores.slice_mut(s![at..at + n]).assign(&d);
        at += n;
    }
    (loss, network.backward(&cache, dscores.view()))
}

/// Fraction of (positive, negative) pairs scored in the right order, ties
/// counting as wrong.
pub fn pairwise_accuracy(network: &Network, data: &EventSet) -> f64 {
    let mut right = 0usize;
    let mut total = 0usize;
    for i in 0..data.len() {
        let rows = data.event(i);
        if rows.nrows() < 2 {
            continue;
        }
        let scores = network.forward(rows);
        right += scores.iter().skip(1).filter(|&&s| scores[0] > s).count();
        total += scores.len() - 1;
    }
    if total == 0 {
        0.0
    } else {
        right as f64 / total as f64
    }
}
