//! Fully connected scorer: sigmoid hidden layers and an affine scalar output.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden widths of the production architecture.
pub const HIDDEN_LAYERS: [usize; 3] = [256, 128, 64];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs x outputs`, so a batch forward is `x.dot(&weights)`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weights: Array2::zeros((inputs, outputs)),
            bias: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
// 1.5 * 2^52: adding it rounds to an integer held in the low mantissa bits.
const ROUND_SHIFT: f64 = 6_755_399_441_055_744.0;

/// `e^x` within a few ulp, branch-free so that loops over it vectorize.
/// Arguments are clamped to `[-708, 708]`.
#[inline(always)]
fn exp_clamped(x: f64) -> f64 {
    let x = x.clamp(-708.0, 708.0);
    let t = x * std::f64::consts::LOG2_E + ROUND_SHIFT;
    let n = t - ROUND_SHIFT;
    let r = (x - n * LN2_HI) - n * LN2_LO;
    // Taylor series to r^12; |r| <= ln2 / 2 bounds the remainder below 2e-16.
    let mut p = 1.0 / 479_001_600.0;
    for c in [
        1.0 / 39_916_800.0,
        1.0 / 3_628_800.0,
        1.0 / 362_880.0,
        1.0 / 40_320.0,
        1.0 / 5_040.0,
        1.0 / 720.0,
        1.0 / 120.0,
        1.0 / 24.0,
        1.0 / 6.0,
        0.5,
        1.0,
        1.0,
    ] {
        p = p * r + c;
    }
    let k = t.to_bits().wrapping_sub(ROUND_SHIFT.to_bits()).wrapping_add(1023);
    p * f64::from_bits(k << 52)
}

#[inline(always)]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + exp_clamped(-z))
}

fn sigmoid_inplace(a: &mut Array2<f64>) {
    match a.as_slice_mut() {
        Some(s) => s.iter_mut().for_each(|v| *v = sigmoid(*v)),
        None => a.mapv_inplace(sigmoid),
    }
}

/// Inverted-dropout mask: 0 with probability `rate`, else `1 / (1 - rate)`.
fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut Xoshiro256PlusPlus) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    let threshold = (rate * 2f64.powi(32)).round() as u64;
    let mut values = Vec::with_capacity(shape.0 * shape.1);
    let mut word = 0u64;
    for i in 0..shape.0 * shape.1 {
        if i % 2 == 0 {
            word = rng.next_u64();
        }
        let draw = (word >> (32 * (i % 2))) & 0xffff_ffff;
        values.push(if draw < threshold { 0.0 } else { keep });
    }
    Array2::from_shape_vec(shape, values).expect("mask shape")
}

/// Layers applied in order; every layer but the last is followed by a
/// sigmoid. The last layer has a single output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<Dense>,
}

/// Activations kept from a training forward pass.
pub(crate) struct ForwardCache {
    /// Input of each layer (after dropout for hidden outputs).
    inputs: Vec<Array2<f64>>,
    /// Sigmoid output of each hidden layer before dropout.
    activations: Vec<Array2<f64>>,
    /// Inverted-dropout multipliers per hidden layer.
    masks: Vec<Option<Array2<f64>>>,
    pub scores: Array1<f64>,
}

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(feature_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        if feature_dim == 0 || hidden.contains(&0) {
            return Err(Error::Config("layer widths must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![feature_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        rng.random_range(-limit..limit)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Network { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let last = layers
            .last()
            .ok_or_else(|| Error::Config("a network needs at least one layer".into()))?;
        if last.outputs() != 1 {
            return Err(Error::Config("the output layer must have one unit".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Config(format!(
                    "layer {i} has {} outputs but layer {} expects {} inputs",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        if layers.iter().any(|l| l.bias.len() != l.outputs()) {
            return Err(Error::Config("bias length differs from layer width".into()));
        }
        Ok(Network { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(Dense::outputs));
        sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    /// Scores for every row of `x`.
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        let (hidden, output) = self.layers.split_at(self.layers.len() - 1);
        let mut h: Option<Array2<f64>> = None;
        for layer in hidden {
            let mut z = match &h {
                Some(prev) => prev.dot(&layer.weights),
                None => x.dot(&layer.weights),
            };
            z += &layer.bias;
            sigmoid_inplace(&mut z);
            h = Some(z);
        }
        let out = &output[0];
        let scores = match &h {
            Some(prev) => prev.dot(&out.weights.column(0)),
            None => x.dot(&out.weights.column(0)),
        };
        scores + out.bias[0]
    }

    /// Score of a single feature vector.
    pub fn score(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: v.len(),
            });
        }
        let x = ArrayView2::from_shape((1, v.len()), v).expect("row view");
        Ok(self.forward(x)[0])
    }

    pub(crate) fn forward_cached<R: Rng>(
        &self,
        x: Array2<f64>,
        dropout: Option<(f64, &mut R)>,
    ) -> ForwardCache {
        let n_hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut activations = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        inputs.push(x);
        let (rate, mut rng) = match dropout {
            Some((rate, rng)) if rate > 0.0 => (rate, Some(Xoshiro256PlusPlus::seed_from_u64(rng.random()))),
            _ => (0.0, None),
        };
        for layer in &self.layers[..n_hidden] {
            let mut a = inputs.last().unwrap().dot(&layer.weights);
            a += &layer.bias;
            sigmoid_inplace(&mut a);
            let (dropped, mask) = match rng.as_mut() {
                Some(rng) => {
                    let mask = dropout_mask(a.dim(), rate, rng);
                    (&a * &mask, Some(mask))
                }
                None => (a.clone(), None),
            };
            activations.push(a);
            masks.push(mask);
            inputs.push(dropped);
        }
        let out = &self.layers[n_hidden];
        let scores = inputs.last().unwrap().dot(&out.weights.column(0)) + out.bias[0];
        ForwardCache {
            inputs,
            activations,
            masks,
            scores,
        }
    }

    /// Parameter gradients given `d loss / d score` for every row.
    pub(crate) fn backward(&self, cache: &ForwardCache, dscores: ArrayView1<'_, f64>) -> Gradients {
        let n_layers = self.layers.len();
        let mut grads: Vec<Dense> = Vec::with_capacity(n_layers);
        let mut delta: Array2<f64> = dscores.insert_axis(Axis(1)).to_owned();
        for l in (0..n_layers).rev() {
            let input = &cache.inputs[l];
            let weights = input.t().dot(&delta);
            let bias = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.layers[l].weights.t());
                if let Some(mask) = &cache.masks[l - 1] {
                    upstream *= mask;
                }
                Zip::from(&mut upstream)
                    .and(&cache.activations[l - 1])
                    .for_each(|d, &a| *d *= a * (1.0 - a));
                delta = upstream;
            }
            grads.push(Dense { weights, bias });
        }
        grads.reverse();
        Gradients { layers: grads }
    }
}

/// Gradient of a scalar loss with respect to every network parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(network: &Network) -> Self {
        Gradients {
            layers: network
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights += &b.weights;
            a.bias += &b.bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.bias *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }

    /// All values, layer by layer (weights then bias).
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }
}
