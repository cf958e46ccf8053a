//! Layers operating on `batch × frames × channels` tensors. Dense layers see
//! a flattened `batch × 1 × features` tensor.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Array3, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv_batch, conv_batch_backward};

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPSILON: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

fn uniform_fill<R: Rng>(shape: usize, limit: f64, rng: &mut R) -> Vec<f64> {
    (0..shape).map(|_| rng.random_range(-limit..limit)).collect()
}

fn as_matrix(x: Array3<f64>) -> Array2<f64> {
    let (b, t, c) = x.dim();
    x.as_standard_layout()
        .into_owned()
        .into_shape_with_order((b, t * c))
        .expect("contiguous")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    /// `out × kernel_len × in`
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
    #[serde(skip)]
    grad_weight: Array3<f64>,
    #[serde(skip)]
    grad_bias: Array1<f64>,
    #[serde(skip)]
    patches: Option<Array2<f64>>,
}

impl Conv1d {
    pub fn new<R: Rng>(in_ch: usize, out_ch: usize, kernel_len: usize, rng: &mut R) -> Self {
        let fan_in = in_ch * kernel_len;
        let limit = (6.0 / fan_in as f64).sqrt();
        let w = uniform_fill(out_ch * kernel_len * in_ch, limit, rng);
        Self::from_parts(
            Array3::from_shape_vec((out_ch, kernel_len, in_ch), w).expect("sized"),
            Array1::zeros(out_ch),
        )
    }

    pub fn from_parts(weight: Array3<f64>, bias: Array1<f64>) -> Self {
        Self {
            grad_weight: Array3::zeros(weight.dim()),
            grad_bias: Array1::zeros(bias.len()),
            weight,
            bias,
            patches: None,
        }
    }

    fn forward(&mut self, x: Array3<f64>, mode: Mode) -> Array3<f64> {
        let (y, patches) = conv_batch(&x, &self.weight, &self.bias);
        if mode == Mode::Train {
            self.patches = Some(patches);
        }
        y
    }

    fn backward(&mut self, dy: Array3<f64>) -> Array3<f64> {
        let patches = self.patches.take().expect("conv backward without forward");
        let (dx, dw, db) = conv_batch_backward(&patches, &self.weight, &dy);
        self.grad_weight = dw;
        self.grad_bias = db;
        dx
    }
}

/// Batch normalization over batch and time, per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    #[serde(skip)]
    grad_gamma: Array1<f64>,
    #[serde(skip)]
    grad_beta: Array1<f64>,
    #[serde(skip)]
    cache: Option<(Array3<f64>, Array1<f64>)>,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Array1::ones(channels),
            beta: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            grad_gamma: Array1::zeros(channels),
            grad_beta: Array1::zeros(channels),
            cache: None,
        }
    }

    /// Normalizes with batch statistics (train) or running statistics
    /// (infer). Train mode updates the running statistics.
    pub fn forward(&mut self, x: Array3<f64>, mode: Mode) -> Array3<f64> {
        match mode {
            Mode::Infer => self.infer(x),
            Mode::Train => {
                let (b, t, c) = x.dim();
                let n = (b * t) as f64;
                let flat = x.view().into_shape_with_order((b * t, c)).expect("contiguous");
                let mean = flat.sum_axis(Axis(0)) / n;
                let mut var = Array1::<f64>::zeros(c);
                for row in flat.rows() {
                    Zip::from(&mut var).and(&row).and(&mean).for_each(|v, x, m| *v += (x - m).powi(2));
                }
                var /= n;
                let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
                let mut xhat = x;
                for mut row in xhat.lanes_mut(Axis(2)) {
                    Zip::from(&mut row).and(&mean).and(&inv_std).for_each(|x, m, s| *x = (*x - m) * s);
                }
                let mut y = xhat.clone();
                for mut row in y.lanes_mut(Axis(2)) {
                    Zip::from(&mut row).and(&self.gamma).and(&self.beta).for_each(|x, g, be| *x = *x * g + be);
                }
                Zip::from(&mut self.running_mean)
                    .and(&mean)
                    .for_each(|r, m| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * m);
                Zip::from(&mut self.running_var)
                    .and(&var)
                    .for_each(|r, v| *r = BN_MOMENTUM * *r + (1.0 - BN_MOMENTUM) * v);
                self.cache = Some((xhat, inv_std));
                y
            }
        }
    }

    pub fn infer(&self, mut x: Array3<f64>) -> Array3<f64> {
        let scale: Array1<f64> = Zip::from(&self.gamma)
            .and(&self.running_var)
            .map_collect(|g, v| g / (v + BN_EPSILON).sqrt());
        let shift: Array1<f64> = Zip::from(&self.beta)
            .and(&self.running_mean)
            .and(&scale)
            .map_collect(|b, m, s| b - m * s);
        for mut row in x.lanes_mut(Axis(2)) {
            Zip::from(&mut row).and(&scale).and(&shift).for_each(|x, s, b| *x = *x * s + b);
        }
        x
    }

    fn backward(&mut self, dy: Array3<f64>) -> Array3<f64> {
        let (xhat, inv_std) = self.cache.take().expect("batch norm backward without forward");
        let (b, t, c) = dy.dim();
        let n = (b * t) as f64;
        let mut sum_dy = Array1::<f64>::zeros(c);
        let mut sum_dy_xhat = Array1::<f64>::zeros(c);
        for (dy_row, xh_row) in dy.lanes(Axis(2)).into_iter().zip(xhat.lanes(Axis(2))) {
            Zip::from(&mut sum_dy).and(&dy_row).for_each(|s, d| *s += d);
            Zip::from(&mut sum_dy_xhat)
                .and(&dy_row)
                .and(&xh_row)
                .for_each(|s, d, x| *s += d * x);
        }
        let mut dx = dy;
        for (mut row, xh_row) in dx.lanes_mut(Axis(2)).into_iter().zip(xhat.lanes(Axis(2))) {
            Zip::from(&mut row)
                .and(&xh_row)
                .and(&self.gamma)
                .and(&inv_std)
                .and(&sum_dy)
                .and(&sum_dy_xhat)
                .for_each(|d, xh, g, s, sd, sdx| {
                    *d = g * s / n * (n * *d - sd - xh * sdx);
                });
        }
        self.grad_gamma = sum_dy_xhat;
        self.grad_beta = sum_dy;
        dx
    }
}

/// Standalone batch normalization of a `batch × frames × channels` tensor.
pub fn batchnorm_forward(layer: &mut BatchNorm, x: Array3<f64>, mode: Mode) -> Array3<f64> {
    layer.forward(x, mode)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `in × out`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    #[serde(skip)]
    grad_weight: Array2<f64>,
    #[serde(skip)]
    grad_bias: Array1<f64>,
    #[serde(skip)]
    input: Option<Array2<f64>>,
}

impl Dense {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let w = uniform_fill(inputs * outputs, limit, rng);
        Self::from_parts(
            Array2::from_shape_vec((inputs, outputs), w).expect("sized"),
            Array1::zeros(outputs),
        )
    }

    pub fn from_parts(weight: Array2<f64>, bias: Array1<f64>) -> Self {
        Self {
            grad_weight: Array2::zeros(weight.dim()),
            grad_bias: Array1::zeros(bias.len()),
            weight,
            bias,
            input: None,
        }
    }

    fn forward(&mut self, x: Array3<f64>, mode: Mode) -> Array3<f64> {
        let x = as_matrix(x);
        let b = x.nrows();
        let out = self.weight.ncols();
        let mut y = Array2::zeros((b, out));
        for mut row in y.rows_mut() {
            row.assign(&self.bias);
        }
        general_mat_mul(1.0, &x, &self.weight, 1.0, &mut y);
        if mode == Mode::Train {
            self.input = Some(x);
        }
        y.into_shape_with_order((b, 1, out)).expect("contiguous")
    }

    fn backward(&mut self, dy: Array3<f64>) -> Array3<f64> {
        let x = self.input.take().expect("dense backward without forward");
        let dy = as_matrix(dy);
        let mut dw = Array2::zeros(self.weight.dim());
        general_mat_mul(1.0, &x.t(), &dy, 0.0, &mut dw);
        self.grad_weight = dw;
        self.grad_bias = dy.sum_axis(Axis(0));
        let mut dx = Array2::zeros(x.dim());
        general_mat_mul(1.0, &dy, &self.weight.t(), 0.0, &mut dx);
        let (b, f) = dx.dim();
        dx.into_shape_with_order((b, 1, f)).expect("contiguous")
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    mask: Option<Array3<bool>>,
}

impl Relu {
    fn forward(&mut self, mut x: Array3<f64>, mode: Mode) -> Array3<f64> {
        if mode == Mode::Train {
            self.mask = Some(x.mapv(|v| v > 0.0));
        }
        x.mapv_inplace(|v| v.max(0.0));
        x
    }

    fn backward(&mut self, mut dy: Array3<f64>) -> Array3<f64> {
        let mask = self.mask.take().expect("relu backward without forward");
        Zip::from(&mut dy).and(&mask).for_each(|d, m| {
            if !m {
                *d = 0.0;
            }
        });
        dy
    }

    pub(crate) fn last_mask(&self) -> Option<&Array3<bool>> {
        self.mask.as_ref()
    }
}

/// Inverted dropout: kept units are scaled by `1 / (1 - rate)` during
/// training, inference is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropout {
    pub rate: f64,
    #[serde(skip)]
    mask: Option<Array3<f64>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Self {
        Self { rate, mask: None }
    }

    fn forward<R: Rng>(&mut self, mut x: Array3<f64>, mode: Mode, rng: &mut R) -> Array3<f64> {
        if mode == Mode::Infer || self.rate == 0.0 {
            self.mask = None;
            return x;
        }
        let keep = 1.0 / (1.0 - self.rate);
        let mask = Array3::from_shape_simple_fn(x.dim(), || {
            if rng.random::<f64>() < self.rate {
                0.0
            } else {
                keep
            }
        });
        x *= &mask;
        self.mask = Some(mask);
        x
    }

    fn backward(&mut self, mut dy: Array3<f64>) -> Array3<f64> {
        if let Some(mask) = self.mask.take() {
            dy *= &mask;
        }
        dy
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Flatten {
    #[serde(skip)]
    input_dim: Option<(usize, usize, usize)>,
}

impl Flatten {
    fn forward(&mut self, x: Array3<f64>) -> Array3<f64> {
        let (b, t, c) = x.dim();
        self.input_dim = Some((b, t, c));
        x.as_standard_layout()
            .into_owned()
            .into_shape_with_order((b, 1, t * c))
            .expect("contiguous")
    }

    fn backward(&mut self, dy: Array3<f64>) -> Array3<f64> {
        let dim = self.input_dim.expect("flatten backward without forward");
        dy.as_standard_layout()
            .into_owned()
            .into_shape_with_order(dim)
            .expect("contiguous")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Layer {
    Conv1d(Conv1d),
    BatchNorm(BatchNorm),
    Relu(Relu),
    Dropout(Dropout),
    Flatten(Flatten),
    Dense(Dense),
}

impl Layer {
    pub fn name(&self) -> &'static str {
        match self {
            Layer::Conv1d(_) => "conv1d",
            Layer::BatchNorm(_) => "batch_norm",
            Layer::Relu(_) => "relu",
            Layer::Dropout(_) => "dropout",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
        }
    }

    pub fn forward<R: Rng>(&mut self, x: Array3<f64>, mode: Mode, rng: &mut R) -> Array3<f64> {
        match self {
            Layer::Conv1d(l) => l.forward(x, mode),
            Layer::BatchNorm(l) => l.forward(x, mode),
            Layer::Relu(l) => l.forward(x, mode),
            Layer::Dropout(l) => l.forward(x, mode, rng),
            Layer::Flatten(l) => l.forward(x),
            Layer::Dense(l) => l.forward(x, mode),
        }
    }

    /// Inference pass; leaves no cached state.
    pub fn infer(&self, x: Array3<f64>) -> Array3<f64> {
        match self {
            Layer::Conv1d(l) => conv_batch(&x, &l.weight, &l.bias).0,
            Layer::BatchNorm(l) => l.infer(x),
            Layer::Relu(_) => x.mapv_into(|v| v.max(0.0)),
            Layer::Dropout(_) => x,
            Layer::Flatten(_) => {
                let (b, t, c) = x.dim();
                x.as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b, 1, t * c))
                    .expect("contiguous")
            }
            Layer::Dense(l) => {
                let x = as_matrix(x);
                let mut y = x.dot(&l.weight);
                y += &l.bias;
                let (b, o) = y.dim();
                y.into_shape_with_order((b, 1, o)).expect("contiguous")
            }
        }
    }

    pub fn backward(&mut self, dy: Array3<f64>) -> Array3<f64> {
        match self {
            Layer::Conv1d(l) => l.backward(dy),
            Layer::BatchNorm(l) => l.backward(dy),
            Layer::Relu(l) => l.backward(dy),
            Layer::Dropout(l) => l.backward(dy),
            Layer::Flatten(l) => l.backward(dy),
            Layer::Dense(l) => l.backward(dy),
        }
    }

    /// Trainable tensors paired with their gradients from the last backward.
    pub fn params_and_grads(&mut self) -> Vec<(&mut [f64], &[f64])> {
        fn pair<'a>(v: &'a mut [f64], g: &'a [f64]) -> (&'a mut [f64], &'a [f64]) {
            (v, g)
        }
        match self {
            Layer::Conv1d(l) => vec![
                pair(l.weight.as_slice_mut().unwrap(), l.grad_weight.as_slice().unwrap()),
                pair(l.bias.as_slice_mut().unwrap(), l.grad_bias.as_slice().unwrap()),
            ],
            Layer::BatchNorm(l) => vec![
                pair(l.gamma.as_slice_mut().unwrap(), l.grad_gamma.as_slice().unwrap()),
                pair(l.beta.as_slice_mut().unwrap(), l.grad_beta.as_slice().unwrap()),
            ],
            Layer::Dense(l) => vec![
                pair(l.weight.as_slice_mut().unwrap(), l.grad_weight.as_slice().unwrap()),
                pair(l.bias.as_slice_mut().unwrap(), l.grad_bias.as_slice().unwrap()),
            ],
            Layer::Relu(_) | Layer::Dropout(_) | Layer::Flatten(_) => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.params_and_grads().into_iter().map(|(v, _)| v).collect()
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv1d(l) => l.weight.len() + l.bias.len(),
            Layer::BatchNorm(l) => l.gamma.len() + l.beta.len(),
            Layer::Dense(l) => l.weight.len() + l.bias.len(),
            Layer::Relu(_) | Layer::Dropout(_) | Layer::Flatten(_) => 0,
        }
    }

    pub(crate) fn relu_mask(&self) -> Option<&Array3<bool>> {
        match self {
            Layer::Relu(r) => r.last_mask(),
            _ => None,
        }
    }

    pub(crate) fn ensure_grad_buffers(&mut self) {
        match self {
            Layer::Conv1d(l) if l.grad_weight.dim() != l.weight.dim() => {
                l.grad_weight = Array3::zeros(l.weight.dim());
                l.grad_bias = Array1::zeros(l.bias.len());
            }
            Layer::BatchNorm(l) if l.grad_gamma.len() != l.gamma.len() => {
                l.grad_gamma = Array1::zeros(l.gamma.len());
                l.grad_beta = Array1::zeros(l.beta.len());
            }
            Layer::Dense(l) if l.grad_weight.dim() != l.weight.dim() => {
                l.grad_weight = Array2::zeros(l.weight.dim());
                l.grad_bias = Array1::zeros(l.bias.len());
            }
            _ => {}
        }
    }
}
