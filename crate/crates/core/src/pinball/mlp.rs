//! A small fully connected quantile network trained on the empirical
//! pinball risk with hand-written backpropagation and Adam.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::pinball::loss::{rho, rho_derivative};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            // 1 - 2 / (e^{2x} + 1): one exp instead of libm's tanh, with
            // absolute error at the level of f64 rounding.
            Activation::Tanh => 1.0 - 2.0 / ((2.0 * x).exp() + 1.0),
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            activation: Activation::Tanh,
            learning_rate: 1e-3,
            epochs: 2000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One affine layer; `weights` is row-major `n_out x n_in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(n_in: usize, n_out: usize) -> Self {
        Self {
            n_in,
            n_out,
            weights: vec![0.0; n_in * n_out],
            biases: vec![0.0; n_out],
        }
    }

    fn forward_into(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.n_in).zip(&self.biases))
        {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

/// Network `x -> y_center + y_scale * f((x - x_mean) / x_scale)` with
/// `f` a stack of affine layers, activation between them and a linear
/// scalar output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    pub activation: Activation,
    pub x_mean: Vec<f64>,
    pub x_scale: Vec<f64>,
    pub y_center: f64,
    pub y_scale: f64,
}

impl Mlp {
    /// Zero network on `q` inputs with identity standardisation.
    pub fn zeros(q: usize, hidden: &[usize], activation: Activation) -> Self {
        let mut sizes = vec![q];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
            activation,
            x_mean: vec![0.0; q],
            x_scale: vec![1.0; q],
            y_center: 0.0,
            y_scale: 1.0,
        }
    }

    /// Glorot-uniform weights `U(+-sqrt(6 / (fan_in + fan_out)))`, zero biases.
    pub fn glorot(q: usize, hidden: &[usize], activation: Activation, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(q, hidden, activation);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.uniform_range(-limit, limit);
            }
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    /// Layer sizes from input to output.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_dim()];
        s.extend(self.layers.iter().map(|l| l.n_out));
        s
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All weights and biases, layer by layer (weights first).
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend(&l.weights);
            p.extend(&l.biases);
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.n_params());
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.x_mean.iter().zip(&self.x_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    /// Raw network output on standardised input.
    fn forward_std(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.resize(self.layers.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.split_at_mut(k + 1);
            let out = &mut rest[0];
            out.resize(layer.n_out, 0.0);
            layer.forward_into(&done[k], out);
            if k < last {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
        }
        acts[last + 1][0]
    }

    /// Prediction in original units.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut acts = Vec::new();
        self.y_center + self.y_scale * self.forward_std(&self.standardize(x), &mut acts)
    }

    fn weight_view(&self, k: usize) -> ArrayView2<'_, f64> {
        let l = &self.layers[k];
        ArrayView2::from_shape((l.n_out, l.n_in), &l.weights).expect("layer shape")
    }

    /// Forward pass over a batch stored feature-major (`q x n`); returns
    /// the activations of every layer, input first.
    fn forward_batch(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let last = self.layers.len() - 1;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (k, layer) in self.layers.iter().enumerate() {
            let mut z = self.weight_view(k).dot(&acts[k]);
            for (mut row, b) in z.axis_iter_mut(Axis(0)).zip(&layer.biases) {
                if k < last {
                    row.mapv_inplace(|v| self.activation.apply(v + b));
                } else {
                    row += *b;
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Mean pinball risk of the raw output against standardised targets,
    /// and its gradient with respect to [`Mlp::params`]. Inputs must already
    /// be standardised.
    pub fn risk_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64], tau: f64) -> (f64, Vec<f64>) {
        self.batch_risk_and_gradient(&feature_major(xs), ys, tau)
    }

    fn batch_risk_and_gradient(&self, x: &Array2<f64>, ys: &[f64], tau: f64) -> (f64, Vec<f64>) {
        let n = ys.len() as f64;
        let acts = self.forward_batch(x);
        let out = acts.last().expect("output");
        let mut risk = 0.0;
        // d rho(y - f) / d f, averaged over the batch.
        let mut delta = Array2::from_shape_fn((1, ys.len()), |(_, i)| {
            let u = ys[i] - out[[0, i]];
            risk += rho(u, tau);
            -rho_derivative(u, tau) / n
        });

        let mut grads: Vec<(Array2<f64>, Vec<f64>)> = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let input = &acts[k];
            let gw = delta.dot(&input.t());
            let gb = delta.sum_axis(Axis(1)).to_vec();
            if k > 0 {
                let mut back = self.weight_view(k).t().dot(&delta);
                ndarray::Zip::from(&mut back)
                    .and(input)
                    .for_each(|d, &a| *d *= self.activation.derivative_from_output(a));
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();

        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw.iter());
            flat.extend(gb);
        }
        (risk / n, flat)
    }

    /// Mean pinball risk of the raw output against standardised targets.
    pub fn risk(&self, xs: &[Vec<f64>], ys: &[f64], tau: f64) -> f64 {
        self.batch_risk(&feature_major(xs), ys, tau)
    }

    fn batch_risk(&self, x: &Array2<f64>, ys: &[f64], tau: f64) -> f64 {
        let acts = self.forward_batch(x);
        let out = acts.last().expect("output");
        ys.iter()
            .zip(out.row(0))
            .map(|(y, f)| rho(y - f, tau))
            .sum::<f64>()
            / ys.len() as f64
    }
}

/// Rows of covariates as a `q x n` matrix.
fn feature_major(xs: &[Vec<f64>]) -> Array2<f64> {
    let q = xs.first().map_or(0, Vec::len);
    Array2::from_shape_fn((q, xs.len()), |(j, i)| xs[i][j])
}

/// Full-batch Adam on the standardised problem. Starts from Glorot weights
/// with the output bias at `start_bias` and returns the network with the
/// lowest risk seen.
pub(crate) fn train(
    xs: &[Vec<f64>],
    ys: &[f64],
    tau: f64,
    start_bias: f64,
    cfg: &MlpConfig,
    rng: &mut Rng,
) -> (Mlp, f64) {
    let q = xs[0].len();
    let mut net = Mlp::glorot(q, &cfg.hidden, cfg.activation, rng);
    let last = net.layers.len() - 1;
    net.layers[last].biases[0] = start_bias;

    let mut params = net.params();
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    let mut best = (f64::INFINITY, params.clone());
    let batch = feature_major(xs);

    for epoch in 1..=cfg.epochs {
        let (risk, grad) = net.batch_risk_and_gradient(&batch, ys, tau);
        if risk < best.0 {
            best = (risk, params.clone());
        }
        let bc1 = 1.0 - cfg.beta1.powi(epoch as i32);
        let bc2 = 1.0 - cfg.beta2.powi(epoch as i32);
        for i in 0..params.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            params[i] -= cfg.learning_rate * (m[i] / bc1) / ((v[i] / bc2).sqrt() + cfg.eps);
        }
        net.set_params(&params);
    }
    let final_risk = net.batch_risk(&batch, ys, tau);
    if final_risk < best.0 {
        best = (final_risk, params);
    }
    net.set_params(&best.1);
    (net, best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_network_predicts_zero() {
        let net = Mlp::zeros(3, &[4, 5], Activation::Tanh);
        assert_eq!(net.predict(&[1.0, -2.0, 3.0]), 0.0);
        assert_eq!(net.sizes(), vec![3, 4, 5, 1]);
        assert_eq!(net.n_params(), 3 * 4 + 4 + 4 * 5 + 5 + 5 + 1);
    }

    #[test]
    fn params_round_trip() {
        let mut rng = Rng::new(1);
        let a = Mlp::glorot(2, &[3], Activation::Tanh, &mut rng);
        let mut b = Mlp::zeros(2, &[3], Activation::Tanh);
        b.set_params(&a.params());
        assert_eq!(a, b);
    }

    #[test]
    fn glorot_limits() {
        let mut rng = Rng::new(2);
        let net = Mlp::glorot(4, &[32, 32], Activation::Tanh, &mut rng);
        for l in &net.layers {
            let lim = (6.0 / (l.n_in + l.n_out) as f64).sqrt();
            assert!(l.weights.iter().all(|w| w.abs() <= lim));
            assert!(l.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let mut rng = Rng::new(31);
        let tau = 0.7;
        let net = Mlp::glorot(2, &[32, 32], Activation::Tanh, &mut rng);
        let xs: Vec<Vec<f64>> = (0..5)
            .map(|_| vec![rng.standard_normal(), rng.standard_normal()])
            .collect();
        // Targets placed well away from the network output (away from the kink).
        let ys: Vec<f64> = xs
            .iter()
            .enumerate()
            .map(|(i, x)| net.predict(x) + if i % 2 == 0 { 0.5 } else { -0.4 })
            .collect();
        let (_, grad) = net.risk_and_gradient(&xs, &ys, tau);
        let p0 = net.params();
        let h = 1e-6;
        let mut probe = net.clone();
        let mut num = Vec::with_capacity(p0.len());
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] = p0[i] + h;
            probe.set_params(&p);
            let up = probe.risk(&xs, &ys, tau);
            p[i] = p0[i] - h;
            probe.set_params(&p);
            let down = probe.risk(&xs, &ys, tau);
            num.push((up - down) / (2.0 * h));
        }
        let diff: f64 = grad.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = num.iter().map(|b| b * b).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-4, "relative gradient error {}", diff / norm);
        for (a, b) in grad.iter().zip(&num) {
            assert!((a - b).abs() <= 1e-4 * a.abs().max(b.abs()).max(1e-4), "{a} vs {b}");
        }
    }
}
