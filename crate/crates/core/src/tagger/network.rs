//! Feedforward relevance network: optional layer combination, input
//! dropout, relu hidden layers and a two-class softmax output.

use ndarray::{Array1, Array2, ArrayView2, ArrayView3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::TaggerConfig;
use crate::error::{Error, Result};
use crate::features::LayerWeights;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `inputs × outputs`
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

    /// Uniform in `±sqrt(6 / fan_in)`, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let weights =
            Array2::from_shape_simple_fn((inputs, outputs), || rng.random_range(-bound..bound));
        Dense {
            weights,
            bias: Array1::zeros(outputs),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_dev_f_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub input_dimension: usize,
    /// Input layers per token: 1 for static features, `k` for contextual.
    pub layer_count: usize,
    /// Hidden layers followed by the two-way output layer.
    pub layers: Vec<Dense>,
    /// Learned layer combination; `None` means the single input layer is
    /// used as-is.
    pub layer_weights: Option<LayerWeights>,
    pub config: TaggerConfig,
    pub metadata: TrainingMetadata,
}

/// Gradients with the same shapes as the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
    pub layer_weights: Option<Vec<f64>>,
}

struct Activations {
    /// Input to each dense layer (after dropout for the first).
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of each dense layer.
    pre: Vec<Array2<f64>>,
}

impl TaggerModel {
    /// Randomly initialised network for `input_dimension`-sized inputs.
    pub fn new(
        input_dimension: usize,
        layer_weights: Option<LayerWeights>,
        config: &TaggerConfig,
        rng: &mut impl Rng,
    ) -> Self {
        let mut layers = Vec::with_capacity(config.hidden_layers.len() + 1);
        let mut fan_in = input_dimension;
        for &h in &config.hidden_layers {
            layers.push(Dense::init(fan_in, h, rng));
            fan_in = h;
        }
        layers.push(Dense::init(fan_in, 2, rng));
        TaggerModel {
            input_dimension,
            layer_count: layer_weights.as_ref().map_or(1, LayerWeights::len),
            layers,
            layer_weights,
            config: config.clone(),
            metadata: TrainingMetadata::default(),
        }
    }

    /// Network with every weight and bias zero.
    pub fn zeros(input_dimension: usize, config: &TaggerConfig) -> Self {
        let mut layers = Vec::new();
        let mut fan_in = input_dimension;
        for &h in &config.hidden_layers {
            layers.push(Dense::zeros(fan_in, h));
            fan_in = h;
        }
        layers.push(Dense::zeros(fan_in, 2));
        TaggerModel {
            input_dimension,
            layer_count: 1,
            layers,
            layer_weights: None,
            config: config.clone(),
            metadata: TrainingMetadata::default(),
        }
    }

    /// Checks that layer shapes chain from the input to two outputs.
    pub fn check_shapes(&self) -> Result<()> {
        let mut fan_in = self.input_dimension;
        for layer in &self.layers {
            let (rows, cols) = layer.weights.dim();
            if rows != fan_in || layer.bias.len() != cols {
                return Err(Error::ModelFormat(format!(
                    "layer shape {rows}x{cols} does not follow input {fan_in}"
                )));
            }
            fan_in = cols;
        }
        if fan_in != 2 {
            return Err(Error::ModelFormat(format!(
                "output layer has {fan_in} units"
            )));
        }
        match &self.layer_weights {
            Some(w) if w.len() != self.layer_count => Err(Error::ModelFormat(format!(
                "{} layer weights for {} input layers",
                w.len(),
                self.layer_count
            ))),
            None if self.layer_count != 1 => Err(Error::ModelFormat(
                "multiple input layers without layer weights".into(),
            )),
            _ => Ok(()),
        }
    }

    fn check_input(&self, inputs: &ArrayView3<f64>) -> Result<()> {
        let (_, k, d) = inputs.dim();
        if d != self.input_dimension {
            return Err(Error::DimensionMismatch {
                expected: self.input_dimension,
                found: d,
            });
        }
        if k != self.layer_count {
            return Err(Error::DimensionMismatch {
                expected: self.layer_count,
                found: k,
            });
        }
        Ok(())
    }

    fn combine(&self, inputs: &ArrayView3<f64>) -> Array2<f64> {
        match &self.layer_weights {
            None => inputs.index_axis(Axis(1), 0).to_owned(),
            Some(w) => {
                let (b, _, d) = inputs.dim();
                let mut out = Array2::zeros((b, d));
                for (j, &wj) in w.as_slice().iter().enumerate() {
                    out.scaled_add(wj, &inputs.index_axis(Axis(1), j));
                }
                out
            }
        }
    }

    fn forward_all(&self, inputs: &ArrayView3<f64>, mask: Option<&Array2<f64>>) -> Activations {
        let combined = self.combine(inputs);
        let first = match mask {
            Some(m) => combined * m,
            None => combined,
        };
        let mut acts = Activations {
            inputs: Vec::with_capacity(self.layers.len()),
            pre: Vec::with_capacity(self.layers.len()),
        };
        let mut current = first;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = current.dot(&layer.weights) + &layer.bias;
            let next = if l < last {
                z.mapv(|v| v.max(0.0))
            } else {
                z.clone()
            };
            acts.inputs.push(current);
            acts.pre.push(z);
            current = next;
        }
        acts
    }

    /// Output logits, `B × 2`, without dropout.
    pub fn logits(&self, inputs: ArrayView3<f64>) -> Result<Array2<f64>> {
        self.check_input(&inputs)?;
        Ok(self
            .forward_all(&inputs, None)
            .pre
            .pop()
            .expect("output layer"))
    }

    /// Relevance probability of each row of `inputs` (`B × layers × dim`).
    pub fn predict(&self, inputs: ArrayView3<f64>) -> Result<Vec<f64>> {
        let logits = self.logits(inputs)?;
        Ok(logits
            .outer_iter()
            .map(|z| softmax2(z[0], z[1])[1])
            .collect())
    }

    /// Relevance score for one single-layer feature vector.
    pub fn forward(&self, feature_vector: &[f64]) -> Result<f64> {
        self.forward_layers(
            ArrayView2::from_shape((1, feature_vector.len()), feature_vector)
                .expect("contiguous slice"),
        )
    }

    /// Relevance score for one token given its `layers × dim` stack.
    pub fn forward_layers(&self, layers: ArrayView2<f64>) -> Result<f64> {
        let stacked = layers.insert_axis(Axis(0));
        Ok(self.predict(stacked)?[0])
    }

    /// Weighted cross-entropy of each sample: `w_i · -log p(y_i)`, with
    /// `w_i = class_weight` for relevant samples and 1 otherwise.
    pub fn sample_losses(
        &self,
        inputs: ArrayView3<f64>,
        labels: &[bool],
        class_weight: f64,
        mask: Option<&Array2<f64>>,
    ) -> Result<Vec<f64>> {
        self.check_input(&inputs)?;
        let acts = self.forward_all(&inputs, mask);
        let logits = acts.pre.last().expect("output layer");
        Ok(logits
            .outer_iter()
            .zip(labels)
            .map(|(z, &y)| {
                let lp = log_softmax2(z[0], z[1]);
                let w = if y { class_weight } else { 1.0 };
                -w * lp[usize::from(y)]
            })
            .collect())
    }

    /// Mean of [`TaggerModel::sample_losses`] over the batch.
    pub fn loss(
        &self,
        inputs: ArrayView3<f64>,
        labels: &[bool],
        class_weight: f64,
        mask: Option<&Array2<f64>>,
    ) -> Result<f64> {
        let terms = self.sample_losses(inputs, labels, class_weight, mask)?;
        Ok(terms.iter().sum::<f64>() / terms.len() as f64)
    }

    /// Batch loss and its gradient with respect to every parameter.
    pub fn loss_and_gradients(
        &self,
        inputs: ArrayView3<f64>,
        labels: &[bool],
        class_weight: f64,
        mask: Option<&Array2<f64>>,
    ) -> Result<(f64, Gradients)> {
        self.check_input(&inputs)?;
        let batch = labels.len();
        if inputs.dim().0 != batch || batch == 0 {
            return Err(Error::DimensionMismatch {
                expected: inputs.dim().0,
                found: batch,
            });
        }
        let acts = self.forward_all(&inputs, mask);
        let logits = acts.pre.last().expect("output layer");

        let n = batch as f64;
        let mut loss = 0.0;
        let mut delta = Array2::zeros((batch, 2));
        for (i, &y) in labels.iter().enumerate() {
            let (z0, z1) = (logits[[i, 0]], logits[[i, 1]]);
            let lp = log_softmax2(z0, z1);
            let p = softmax2(z0, z1);
            let w = if y { class_weight } else { 1.0 };
            let t = usize::from(y);
            loss -= w * lp[t];
            for c in 0..2 {
                let target = if c == t { 1.0 } else { 0.0 };
                delta[[i, c]] = w * (p[c] - target) / n;
            }
        }
        loss /= n;

        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = &acts.inputs[l];
            grads.push(Dense {
                weights: input.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            let mut back = delta.dot(&layer.weights.t());
            if l > 0 {
                // relu' of the previous layer's pre-activation
                back.zip_mut_with(&acts.pre[l - 1], |g, &z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
            }
            delta = back;
        }
        grads.reverse();

        let layer_weights = self.layer_weights.as_ref().map(|w| {
            let d_combined = match mask {
                Some(m) => &delta * m,
                None => delta.clone(),
            };
            (0..w.len())
                .map(|j| (&d_combined * &inputs.index_axis(Axis(1), j)).sum())
                .collect()
        });
        Ok((
            loss,
            Gradients {
                layers: grads,
                layer_weights,
            },
        ))
    }

    /// Plain gradient descent step.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-learning_rate, &g.weights);
            layer.bias.scaled_add(-learning_rate, &g.bias);
        }
        if let (Some(w), Some(g)) = (&mut self.layer_weights, &grads.layer_weights) {
            for (wj, gj) in w.0.iter_mut().zip(g) {
                *wj -= learning_rate * gj;
            }
        }
    }

    /// Mutable view of every scalar parameter, in a fixed order.
    pub fn parameters_mut(&mut self) -> Vec<&mut f64> {
        let mut out: Vec<&mut f64> = Vec::new();
        for layer in &mut self.layers {
            out.extend(layer.weights.iter_mut());
            out.extend(layer.bias.iter_mut());
        }
        if let Some(w) = &mut self.layer_weights {
            out.extend(w.0.iter_mut());
        }
        out
    }
}

impl Gradients {
    /// Gradient entries in the order of [`TaggerModel::parameters_mut`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        if let Some(w) = &self.layer_weights {
            out.extend(w.iter().copied());
        }
        out
    }
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut impl Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

fn softmax2(z0: f64, z1: f64) -> [f64; 2] {
    // p1 = 1 / (1 + e^{z0 - z1})
    let p1 = 1.0 / (1.0 + (z0 - z1).exp());
    [1.0 - p1, p1]
}

fn log_softmax2(z0: f64, z1: f64) -> [f64; 2] {
    let m = z0.max(z1);
    let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
    [z0 - lse, z1 - lse]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr2, Array3};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(hidden: &[usize]) -> TaggerConfig {
        TaggerConfig {
            hidden_layers: hidden.to_vec(),
            ..Default::default()
        }
    }

    #[test]
    fn zero_model_scores_one_half() {
        let m = TaggerModel::zeros(4, &small_config(&[3, 3]));
        assert_eq!(m.forward(&[1.0, -2.0, 3.0, 0.5]).unwrap(), 0.5);
    }

    #[test]
    fn hand_built_single_layer() {
        // x = (1, -2); hidden W = [[1, 0], [0.5, -1]], b = (0.1, 0)
        // z = (1 - 1 + 0.1, 0 + 2 + 0) = (0.1, 2.0) -> relu same
        // output W = [[1, -1], [0, 0.5]], b = (0, 0.2)
        // logits = (0.1, -0.1 + 1.0 + 0.2) = (0.1, 1.1)
        let mut m = TaggerModel::zeros(2, &small_config(&[2]));
        m.layers[0] = Dense {
            weights: arr2(&[[1.0, 0.0], [0.5, -1.0]]),
            bias: Array1::from(vec![0.1, 0.0]),
        };
        m.layers[1] = Dense {
            weights: arr2(&[[1.0, -1.0], [0.0, 0.5]]),
            bias: Array1::from(vec![0.0, 0.2]),
        };
        let expected = 1.1f64.exp() / (0.1f64.exp() + 1.1f64.exp());
        assert_abs_diff_eq!(m.forward(&[1.0, -2.0]).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn outputs_are_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = TaggerModel::new(6, None, &small_config(&[8, 8]), &mut rng);
        let x = Array3::from_shape_simple_fn((40, 1, 6), || rng.random_range(-30.0..30.0));
        let logits = m.logits(x.view()).unwrap();
        for z in logits.outer_iter() {
            let p = softmax2(z[0], z[1]);
            assert!((0.0..=1.0).contains(&p[1]));
            assert_abs_diff_eq!(p[0] + p[1], 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let m = TaggerModel::zeros(3, &small_config(&[2]));
        assert!(matches!(
            m.forward(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        ));
    }

    #[test]
    fn doubling_class_weight_doubles_relevant_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = TaggerModel::new(4, None, &small_config(&[5]), &mut rng);
        let x = Array3::from_shape_simple_fn((6, 1, 4), || rng.random_range(-1.0..1.0));
        let labels = [true, false, true, false, false, true];
        let a = m.sample_losses(x.view(), &labels, 2.0, None).unwrap();
        let b = m.sample_losses(x.view(), &labels, 4.0, None).unwrap();
        for ((ta, tb), &y) in a.iter().zip(&b).zip(&labels) {
            if y {
                assert_eq!(*tb, 2.0 * ta);
            } else {
                assert_eq!(tb, ta);
            }
        }
    }

    #[test]
    fn dropout_mask_is_inverted() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = dropout_mask(200, 50, 0.6, &mut rng);
        assert!(m.iter().all(|&v| v == 0.0 || (v - 2.5).abs() < 1e-12));
        let mean = m.mean().unwrap();
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let config = small_config(&[6, 5]);
        let model = TaggerModel::new(4, Some(LayerWeights::uniform(3)), &config, &mut rng);
        let x = Array3::from_shape_simple_fn((8, 3, 4), || rng.random_range(-1.0..1.0));
        let labels: Vec<bool> = (0..8).map(|i| i % 3 == 0).collect();
        let mask = dropout_mask(8, 4, 0.3, &mut rng);
        let (_, grads) = model
            .loss_and_gradients(x.view(), &labels, 2.0, Some(&mask))
            .unwrap();
        let analytic = grads.flatten();
        let h = 1e-5;
        for (i, &a) in analytic.iter().enumerate() {
            let mut plus = model.clone();
            *plus.parameters_mut()[i] += h;
            let mut minus = model.clone();
            *minus.parameters_mut()[i] -= h;
            let lp = plus.loss(x.view(), &labels, 2.0, Some(&mask)).unwrap();
            let lm = minus.loss(x.view(), &labels, 2.0, Some(&mask)).unwrap();
            let numeric = (lp - lm) / (2.0 * h);
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            assert!(rel < 1e-4, "parameter {i}: analytic {a} numeric {numeric}");
        }
    }
}
