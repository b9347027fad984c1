use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{stream, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    /// ADADELTA decay ρ of the running squared-gradient and squared-step
    /// averages.
    pub lr_decay: f64,
    pub epsilon: f64,
    pub batch_size: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: vec![64],
            epochs: 10,
            lr_decay: 0.95,
            epsilon: 1e-6,
            batch_size: 16,
        }
    }
}

/// Feed-forward network with ReLU hidden layers and a linear output.
/// Inputs are standardised with the training statistics it stores.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpFit {
    pub layer_sizes: Vec<usize>,
    /// Layer `l` maps `layer_sizes[l]` inputs to `layer_sizes[l + 1]` outputs.
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub epochs_run: usize,
}

impl MlpFit {
    /// He-initialised weights, zero hidden biases, output bias `output_bias`,
    /// identity standardisation.
    pub fn initialise(n_inputs: usize, hidden: &[usize], output_bias: f64, rng: &mut Rng) -> Self {
        let mut layer_sizes = vec![n_inputs];
        layer_sizes.extend_from_slice(hidden);
        layer_sizes.push(1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let normal = Normal::new(0.0, (2.0 / fan_in.max(1) as f64).sqrt()).unwrap();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| normal.sample(rng)));
            biases.push(DVector::zeros(fan_out));
        }
        biases.last_mut().unwrap()[0] = output_bias;
        Self {
            layer_sizes,
            weights,
            biases,
            x_mean: vec![0.0; n_inputs],
            x_scale: vec![1.0; n_inputs],
            epochs_run: 0,
        }
    }

    pub fn standardise(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            (x[(i, j)] - self.x_mean[j]) / self.x_scale[j]
        })
    }

    /// Pre-activations and activations per layer for standardised inputs.
    fn forward(&self, x_std: &DMatrix<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut act = vec![x_std.clone()];
        for l in 0..n_layers {
            let mut z = &act[l] * self.weights[l].transpose();
            for mut row in z.row_iter_mut() {
                row += self.biases[l].transpose();
            }
            let a = if l + 1 < n_layers {
                z.map(|v| v.max(0.0))
            } else {
                z.clone()
            };
            pre.push(z);
            act.push(a);
        }
        (pre, act)
    }

    pub fn predict_standardised(&self, x_std: &DMatrix<f64>) -> Vec<f64> {
        let (_, act) = self.forward(x_std);
        act.last().unwrap().column(0).iter().copied().collect()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Vec<f64> {
        self.predict_standardised(&self.standardise(x))
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// All weights and biases, layer by layer (weights column-major first).
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }

    pub fn set_parameters(&mut self, theta: &[f64]) {
        let mut pos = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let nw = w.len();
            w.as_mut_slice().copy_from_slice(&theta[pos..pos + nw]);
            pos += nw;
            let nb = b.len();
            b.as_mut_slice().copy_from_slice(&theta[pos..pos + nb]);
            pos += nb;
        }
    }

    /// Loss Σ(ŷ − y)²/(2n) on standardised inputs and its gradient in the
    /// order of [`MlpFit::parameters`].
    pub fn loss_and_gradient(&self, x_std: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let n = y.len() as f64;
        let (pre, act) = self.forward(x_std);
        let out = act.last().unwrap();
        let mut delta = DMatrix::from_fn(y.len(), 1, |i, _| (out[(i, 0)] - y[i]) / n);
        let loss = delta.iter().map(|d| d * d).sum::<f64>() * n / 2.0;

        let n_layers = self.weights.len();
        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(n_layers);
        for l in (0..n_layers).rev() {
            let gw = delta.transpose() * &act[l];
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            if l > 0 {
                let mut back = &delta * &self.weights[l];
                back.zip_apply(&pre[l - 1], |d, z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.n_parameters());
        for (gw, gb) in grads {
            flat.extend_from_slice(gw.as_slice());
            flat.extend_from_slice(gb.as_slice());
        }
        (loss, flat)
    }
}

/// Minibatch ADADELTA on squared loss; deterministic for a given seed.
pub fn fit_mlp(x: &DMatrix<f64>, y: &[f64], params: &MlpParams, seed: u64) -> Result<MlpFit> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::InvalidArgument("empty training data".into()));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if !(params.lr_decay > 0.0 && params.lr_decay < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "lr_decay must lie in (0, 1), got {}",
            params.lr_decay
        )));
    }
    if params.batch_size == 0 || params.epsilon <= 0.0 || params.hidden.contains(&0) {
        return Err(Error::InvalidArgument("invalid network parameters".into()));
    }

    let mut rng = stream(seed, &[]);
    let n = x.nrows();
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let mut net = MlpFit::initialise(x.ncols(), &params.hidden, mean_y, &mut rng);
    for j in 0..x.ncols() {
        let col = x.column(j);
        let m = col.mean();
        let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64).sqrt();
        net.x_mean[j] = m;
        net.x_scale[j] = if sd > 0.0 { sd } else { 1.0 };
    }
    let xs = net.standardise(x);

    let rho = params.lr_decay;
    let eps = params.epsilon;
    let mut theta = net.parameters();
    let mut acc_grad = vec![0.0; theta.len()];
    let mut acc_step = vec![0.0; theta.len()];
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(params.batch_size) {
            let xb = xs.select_rows(batch.iter());
            let yb: Vec<f64> = batch.iter().map(|&i| y[i]).collect();
            let (loss, grad) = net.loss_and_gradient(&xb, &yb);
            epoch_loss += loss * batch.len() as f64;
            for p in 0..theta.len() {
                let g = grad[p];
                acc_grad[p] = rho * acc_grad[p] + (1.0 - rho) * g * g;
                let step = -((acc_step[p] + eps).sqrt() / (acc_grad[p] + eps).sqrt()) * g;
                acc_step[p] = rho * acc_step[p] + (1.0 - rho) * step * step;
                theta[p] += step;
            }
            net.set_parameters(&theta);
        }
        if !epoch_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "network loss became {epoch_loss} in epoch {}",
                epoch + 1
            )));
        }
        net.epochs_run = epoch + 1;
    }
    Ok(net)
}
