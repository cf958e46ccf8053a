use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{BatchNorm, Conv1d, Dense, Dropout, Flatten, Layer, Mode, Relu};
use super::loss::sigmoid;
use super::ModelSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: ModelSpec,
    pub layers: Vec<Layer>,
}

/// Stacks `frames × channels` samples into a `batch × frames × channels`
/// tensor.
pub fn stack<'a>(samples: impl IntoIterator<Item = &'a Array2<f64>>) -> Array3<f64> {
    let views: Vec<_> = samples.into_iter().map(|s| s.view()).collect();
    ndarray::stack(Axis(0), &views).expect("samples share one shape")
}

impl Network {
    pub fn new<R: Rng>(spec: &ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let (frames, mut channels) = spec.input_shape;
        let mut layers = Vec::new();
        for c in &spec.conv_layers {
            layers.push(Layer::Conv1d(Conv1d::new(channels, c.n_kernels, c.kernel_len, rng)));
            layers.push(Layer::BatchNorm(BatchNorm::new(c.n_kernels)));
            layers.push(Layer::Relu(Relu::default()));
            layers.push(Layer::Dropout(Dropout::new(spec.dropout_rate)));
            channels = c.n_kernels;
        }
        layers.push(Layer::Flatten(Flatten::default()));
        layers.push(Layer::Dense(Dense::new(frames * channels, spec.fc_units, rng)));
        layers.push(Layer::BatchNorm(BatchNorm::new(spec.fc_units)));
        layers.push(Layer::Relu(Relu::default()));
        layers.push(Layer::Dropout(Dropout::new(spec.dropout_rate)));
        layers.push(Layer::Dense(Dense::new(spec.fc_units, 1, rng)));
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    /// Builds a network from explicit layers, e.g. for gradient checks.
    pub fn from_layers(spec: ModelSpec, layers: Vec<Layer>) -> Self {
        Self { spec, layers }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        let (_, t, c) = x.dim();
        if (t, c) != self.spec.input_shape {
            return Err(Error::Shape(format!(
                "network expects {}x{} input, got {t}x{c}",
                self.spec.input_shape.0, self.spec.input_shape.1
            )));
        }
        Ok(())
    }

    /// Training-mode forward pass; caches activations for [`Self::backward`].
    pub fn forward_train<R: Rng>(&mut self, x: Array3<f64>, rng: &mut R) -> Result<Array1<f64>> {
        self.check_input(&x)?;
        let mut h = x;
        for l in &mut self.layers {
            h = l.forward(h, Mode::Train, rng);
        }
        Ok(flatten_logits(h))
    }

    /// Backpropagates `d loss / d logit` per sample; returns the input
    /// gradient and leaves parameter gradients in the layers.
    pub fn backward(&mut self, dlogits: &Array1<f64>) -> Array3<f64> {
        let mut g = dlogits
            .clone()
            .into_shape_with_order((dlogits.len(), 1, 1))
            .expect("contiguous");
        for l in self.layers.iter_mut().rev() {
            g = l.backward(g);
        }
        g
    }

    pub fn logits(&self, x: Array3<f64>) -> Result<Array1<f64>> {
        self.check_input(&x)?;
        let mut h = x;
        for l in &self.layers {
            h = l.infer(h);
        }
        Ok(flatten_logits(h))
    }

    /// Probability of FM+ for a single `frames × channels` sample.
    pub fn predict_proba(&self, x: &Array2<f64>) -> Result<f64> {
        let logits = self.logits(x.view().insert_axis(Axis(0)).to_owned())?;
        Ok(sigmoid(logits[0]))
    }

    pub fn predict_batch(&self, xs: &[&Array2<f64>]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(32) {
            let logits = self.logits(stack(chunk.iter().copied()))?;
            out.extend(logits.iter().map(|z| sigmoid(*z)));
        }
        Ok(out)
    }

    pub fn params_and_grads(&mut self) -> Vec<(&mut [f64], &[f64])> {
        self.layers.iter_mut().flat_map(|l| l.params_and_grads()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// ReLU activation patterns from the last training forward pass.
    pub fn relu_masks(&self) -> Vec<Array3<bool>> {
        self.layers.iter().filter_map(|l| l.relu_mask().cloned()).collect()
    }

    pub(crate) fn ensure_grad_buffers(&mut self) {
        for l in &mut self.layers {
            l.ensure_grad_buffers();
        }
    }
}

fn flatten_logits(h: Array3<f64>) -> Array1<f64> {
    let b = h.len_of(Axis(0));
    h.into_shape_with_order(b).expect("one logit per sample")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ConvSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn preset_shapes_are_preserved() {
        for name in crate::nn::preset_names() {
            let (_, spec) = crate::nn::preset(&name).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let net = Network::new(&spec, &mut rng).unwrap();
            let mut h = Array3::zeros((1, spec.input_shape.0, spec.input_shape.1));
            for l in &net.layers {
                if let Layer::Flatten(_) = l {
                    break;
                }
                h = l.infer(h);
                assert_eq!(h.dim().1, spec.input_shape.0, "{name}");
            }
        }
    }

    #[test]
    fn probabilities_are_bounded_and_pure() {
        let spec = ModelSpec::new(vec![ConvSpec::new(2, 3)], 4, (12, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = Network::new(&spec, &mut rng).unwrap();
        for _ in 0..1000 {
            let x = Array2::from_shape_fn((12, 3), |_| rng.random_range(-50.0..50.0));
            let p = net.predict_proba(&x).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert_eq!(p, net.predict_proba(&x).unwrap());
        }
        assert!(net.predict_proba(&Array2::zeros((11, 3))).is_err());
    }
}
