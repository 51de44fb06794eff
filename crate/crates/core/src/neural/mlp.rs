use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::Uniform;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: &mut Array2<f64>) {
        if self == Activation::Relu {
            z.mapv_inplace(|x| x.max(0.0));
        }
    }
}

/// Affine layer `x W + b`, `W` stored as `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
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

/// Feed-forward network with a shared hidden activation and linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

/// Per-layer inputs and pre-activations saved by [`Mlp::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

/// Parameter gradients, laid out like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weights.iter().chain(l.bias.iter()).map(|g| g * g).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights *= factor;
            l.bias *= factor;
        }
    }

    /// Adds the gradient of `lambda * Σ W²` over weight matrices (biases are
    /// not decayed).
    pub fn add_weight_decay(&mut self, model: &Mlp, lambda: f64) {
        if lambda == 0.0 {
            return;
        }
        for (g, l) in self.layers.iter_mut().zip(&model.layers) {
            g.weights.scaled_add(2.0 * lambda, &l.weights);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }
}

impl Mlp {
    /// Uniform `±1/sqrt(fan_in)` initialization of weights and biases.
    pub fn new<R: Rng>(widths: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let mut model = Self::zeros(widths, activation)?;
        for layer in &mut model.layers {
            let bound = 1.0 / (layer.inputs() as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            layer.weights.mapv_inplace(|_| rng.sample(dist));
            layer.bias.mapv_inplace(|_| rng.sample(dist));
        }
        Ok(model)
    }

    pub fn zeros(widths: &[usize], activation: Activation) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(invalid(format!("bad layer widths {widths:?}")));
        }
        Ok(Self {
            layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
            activation,
        })
    }

    /// Input width, `hidden` layers of `width` units, then `outputs`.
    pub fn widths(inputs: usize, hidden: usize, width: usize, outputs: usize) -> Vec<usize> {
        let mut w = vec![inputs];
        w.extend(std::iter::repeat_n(width, hidden));
        w.push(outputs);
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").outputs()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(invalid(format!(
                "input has {} features, model expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weights) + &layer.bias;
            if i < last {
                self.activation.apply(&mut z);
            }
            a = z;
        }
        Ok(a)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(last);
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.weights) + &layer.bias;
            inputs.push(a);
            if i < last {
                let mut h = z.clone();
                self.activation.apply(&mut h);
                pre_activations.push(z);
                a = h;
            } else {
                a = z;
            }
        }
        Ok(ForwardCache {
            inputs,
            pre_activations,
            output: a,
        })
    }

    /// Reverse-mode gradients of a loss given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_output: ArrayView2<'_, f64>) -> Result<Gradients> {
        if grad_output.dim() != cache.output.dim() {
            return Err(invalid("output gradient shape does not match forward pass"));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut delta = grad_output.to_owned();
        for i in (0..self.layers.len()).rev() {
            let a = &cache.inputs[i];
            layers.push(Dense {
                weights: a.t().dot(&delta),
                bias: delta.sum_axis(Axis(0)),
            });
            if i > 0 {
                let mut back = delta.dot(&self.layers[i].weights.t());
                if self.activation == Activation::Relu {
                    back.zip_mut_with(&cache.pre_activations[i - 1], |d, &z| {
                        if z <= 0.0 {
                            *d = 0.0;
                        }
                    });
                }
                delta = back;
            }
        }
        layers.reverse();
        Ok(Gradients { layers })
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|x| x.is_finite()))
    }
}

#[derive(Serialize, Deserialize)]
struct DenseJson {
    inputs: usize,
    outputs: usize,
    /// Row-major `inputs x outputs`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MlpJson {
    activation: Activation,
    layers: Vec<DenseJson>,
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MlpJson {
            activation: self.activation,
            layers: self
                .layers
                .iter()
                .map(|l| DenseJson {
                    inputs: l.inputs(),
                    outputs: l.outputs(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = MlpJson::deserialize(d)?;
        let mut layers = Vec::with_capacity(raw.layers.len());
        for l in raw.layers {
            if l.bias.len() != l.outputs {
                return Err(D::Error::custom("bias length does not match outputs"));
            }
            let weights = Array2::from_shape_vec((l.inputs, l.outputs), l.weights)
                .map_err(|e| D::Error::custom(e.to_string()))?;
            layers.push(Dense {
                weights,
                bias: Array1::from(l.bias),
            });
        }
        if layers.is_empty() || layers.windows(2).any(|w| w[0].outputs() != w[1].inputs()) {
            return Err(D::Error::custom("layer shapes do not chain"));
        }
        Ok(Mlp {
            layers,
            activation: raw.activation,
        })
    }
}

/// Mean squared error over a batch and its gradient with respect to the
/// (single-column) predictions.
pub fn mse_loss_grad(pred: ArrayView2<'_, f64>, target: &[f64]) -> (f64, Array2<f64>) {
    let n = target.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(pred.dim());
    for (i, &y) in target.iter().enumerate() {
        let r = pred[[i, 0]] - y;
        loss += r * r;
        grad[[i, 0]] = 2.0 * r / n;
    }
    (loss / n, grad)
}

/// Mean softmax cross-entropy over a batch and its gradient with respect to
/// the logits.
pub fn cross_entropy_loss_grad(logits: ArrayView2<'_, f64>, classes: &[usize]) -> (f64, Array2<f64>) {
    let n = classes.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    for (i, &c) in classes.iter().enumerate() {
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_norm = max + sum.ln();
        loss += log_norm - row[c];
        for (j, &z) in row.iter().enumerate() {
            grad[[i, j]] = ((z - log_norm).exp() - if j == c { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

pub(crate) fn non_finite(what: &str) -> Error {
    Error::Numeric(format!("{what} is not finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_model_gives_zero_output() {
        let m = Mlp::zeros(&[3, 4, 2], Activation::Relu).unwrap();
        let y = m.predict(array![[1.0, -2.0, 3.0]].view()).unwrap();
        assert_eq!(y, array![[0.0, 0.0]]);
    }

    #[test]
    fn identity_layer() {
        let mut m = Mlp::zeros(&[3, 3], Activation::Relu).unwrap();
        m.layers[0].weights = Array2::eye(3);
        let x = array![[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]];
        let y = m.predict(x.view()).unwrap();
        assert!((&y - &x).iter().all(|d| d.abs() < 1e-9));
    }

    #[test]
    fn shape_mismatch() {
        let m = Mlp::zeros(&[3, 2], Activation::Relu).unwrap();
        assert!(m.predict(array![[1.0, 2.0]].view()).is_err());
        let cache = m.forward(array![[1.0, 2.0, 3.0]].view()).unwrap();
        assert!(m.backward(&cache, array![[1.0]].view()).is_err());
    }

    #[test]
    fn zero_output_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(&[2, 5, 5, 1], Activation::Relu, &mut rng).unwrap();
        let cache = m.forward(array![[0.3, -0.7]].view()).unwrap();
        let g = m.backward(&cache, Array2::zeros((1, 1)).view()).unwrap();
        assert_eq!(g.norm(), 0.0);
        assert_eq!(g, Gradients::zeros_like(&m));
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mlp::new(&[2, 3, 1], Activation::Relu, &mut rng).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let back: Mlp = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(text.starts_with(r#"{"activation":"relu","layers":[{"inputs":2,"outputs":3,"#));
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let (loss, grad) = cross_entropy_loss_grad(array![[0.0, 0.0, 0.0]].view(), &[1]);
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!((grad[[0, 1]] + 2.0 / 3.0).abs() < 1e-12);
        assert!((grad.sum()).abs() < 1e-12);
    }
}
