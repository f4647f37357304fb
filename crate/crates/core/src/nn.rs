//! Small dense feed-forward networks with a softmax head.
//!
//! Shared by the conditional source function and the reference base learners.
//! Training minimizes mean soft-target cross-entropy with seeded minibatch
//! gradient descent.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output `a`.
    fn derivative(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn xavier(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.gen_range(-limit..limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    fn forward_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum();
            out.push(z + self.bias[o]);
        }
    }

    fn num_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Numerically stable softmax, in place.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Targets for the cross-entropy objective.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    /// Class index per example.
    Hard(&'a [usize]),
    /// Distribution per example.
    Soft(&'a [Vec<f64>]),
}

impl Targets<'_> {
    fn len(&self) -> usize {
        match self {
            Targets::Hard(t) => t.len(),
            Targets::Soft(t) => t.len(),
        }
    }

    fn loss(&self, i: usize, probs: &[f64]) -> f64 {
        const FLOOR: f64 = 1e-300;
        match self {
            Targets::Hard(t) => -probs[t[i]].max(FLOOR).ln(),
            Targets::Soft(t) => t[i]
                .iter()
                .zip(probs)
                .filter(|(&q, _)| q > 0.0)
                .map(|(&q, &p)| -q * p.max(FLOOR).ln())
                .sum(),
        }
    }

    /// d loss / d logits = probs - target.
    fn logit_grad(&self, i: usize, probs: &[f64], out: &mut [f64]) {
        out.copy_from_slice(probs);
        match self {
            Targets::Hard(t) => out[t[i]] -= 1.0,
            Targets::Soft(t) => {
                for (g, q) in out.iter_mut().zip(&t[i]) {
                    *g -= q;
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::validation("epochs and batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation(
                "learning_rate must be positive and finite",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub activation: Activation,
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `widths` lists every layer width from input to output. Hidden layers
    /// get seeded Xavier-uniform weights; the output layer starts at zero so
    /// an untrained network emits the uniform distribution.
    pub fn new(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::validation(format!(
                "invalid layer widths {widths:?}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                if i + 1 == n {
                    Dense::zeros(widths[i], widths[i + 1])
                } else {
                    Dense::xavier(widths[i], widths[i + 1], &mut rng)
                }
            })
            .collect();
        Ok(Self { activation, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(Dense::num_params).sum()
    }

    pub fn check_shapes(&self) -> Result<()> {
        for (i, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::validation(format!(
                    "layer {i} has inconsistent shapes"
                )));
            }
            if i > 0 && self.layers[i - 1].outputs != l.inputs {
                return Err(Error::validation(format!("layer {i} input width mismatch")));
            }
        }
        if self.layers.is_empty() {
            return Err(Error::validation("network has no layers"));
        }
        Ok(())
    }

    /// Logits for one input.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward_into(&cur, &mut next);
            if i < last {
                for v in next.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Softmax probabilities for one input.
    pub fn probs(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.logits(x);
        softmax_in_place(&mut z);
        z
    }

    /// Every layer's post-activation output (input first, softmax last).
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::new();
            layer.forward_into(&acts[i], &mut out);
            if i < last {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            } else {
                softmax_in_place(&mut out);
            }
            acts.push(out);
        }
        acts
    }

    fn zero_grads(&self) -> Vec<Dense> {
        self.layers
            .iter()
            .map(|l| Dense::zeros(l.inputs, l.outputs))
            .collect()
    }

    /// Mean cross-entropy over `batch` and its gradient.
    pub fn loss_and_grad(
        &self,
        inputs: &[&[f64]],
        targets: Targets<'_>,
        batch: &[usize],
    ) -> (f64, Vec<Dense>) {
        let mut grads = self.zero_grads();
        let mut total = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for &i in batch {
            let acts = self.forward_trace(inputs[i]);
            let probs = acts.last().expect("at least one layer");
            total += targets.loss(i, probs);
            let mut delta = vec![0.0; probs.len()];
            targets.logit_grad(i, probs, &mut delta);
            for l in (0..self.layers.len()).rev() {
                let layer = &self.layers[l];
                let input = &acts[l];
                let g = &mut grads[l];
                for o in 0..layer.outputs {
                    let d = delta[o] * scale;
                    g.bias[o] += d;
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
                if l > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for o in 0..layer.outputs {
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (p, &w) in prev.iter_mut().zip(row) {
                            *p += delta[o] * w;
                        }
                    }
                    for (p, &a) in prev.iter_mut().zip(input) {
                        *p *= self.activation.derivative(a);
                    }
                    delta = prev;
                }
            }
        }
        (total * scale, grads)
    }

    /// Mean cross-entropy over all examples.
    pub fn mean_loss(&self, inputs: &[&[f64]], targets: Targets<'_>) -> f64 {
        let n = inputs.len();
        let total: f64 = crate::par::map_range(n, |i| targets.loss(i, &self.probs(inputs[i])))
            .into_iter()
            .sum();
        total / n as f64
    }

    fn step(&mut self, grads: &[Dense], lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads) {
            for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            for (b, gb) in layer.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }

    /// Seeded minibatch gradient descent. Returns the full-data loss before
    /// training followed by the loss after each epoch.
    pub fn fit(
        &mut self,
        inputs: &[&[f64]],
        targets: Targets<'_>,
        settings: &TrainSettings,
        seed: u64,
    ) -> Result<Vec<f64>> {
        settings.validate()?;
        if inputs.is_empty() {
            return Err(Error::validation("cannot train on an empty set"));
        }
        if targets.len() != inputs.len() {
            return Err(Error::validation("targets and inputs differ in length"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..inputs.len()).collect();
        let mut history = Vec::with_capacity(settings.epochs + 1);
        history.push(self.mean_loss(inputs, targets));
        for epoch in 1..=settings.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(settings.batch_size) {
                let (_, grads) = self.loss_and_grad(inputs, targets, batch);
                self.step(&grads, settings.learning_rate);
            }
            let loss = self.mean_loss(inputs, targets);
            if !loss.is_finite() {
                return Err(Error::Training {
                    epoch,
                    message: format!("loss became {loss}"),
                });
            }
            if !self
                .layers
                .iter()
                .all(|l| l.weights.iter().chain(&l.bias).all(|w| w.is_finite()))
            {
                return Err(Error::Training {
                    epoch,
                    message: "parameters overflowed".into(),
                });
            }
            history.push(loss);
        }
        Ok(history)
    }

    /// Mutable view of every parameter, layer by layer (weights then bias).
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }
}

/// Flatten gradients in the same order as [`Mlp::params_mut`].
pub fn flatten(grads: &[Dense]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(g.bias.iter()).copied())
        .collect()
}

/// Finite-difference check of [`Mlp::loss_and_grad`].
pub mod gradcheck {
    use super::*;

    /// Largest relative error between the analytic gradient and central
    /// differences, over every parameter.
    pub fn max_relative_error(net: &Mlp, inputs: &[&[f64]], targets: Targets<'_>) -> f64 {
        let batch: Vec<usize> = (0..inputs.len()).collect();
        let (_, grads) = net.loss_and_grad(inputs, targets, &batch);
        let analytic = flatten(&grads);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for (k, &a) in analytic.iter().enumerate() {
            let mut plus = net.clone();
            *plus.params_mut().nth(k).unwrap() += h;
            let mut minus = net.clone();
            *minus.params_mut().nth(k).unwrap() -= h;
            let numeric =
                (plus.mean_loss(inputs, targets) - minus.mean_loss(inputs, targets)) / (2.0 * h);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((a - numeric).abs() / denom);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_is_stable_and_normalized() {
        let mut z = vec![1000.0, 1000.0, -1000.0];
        softmax_in_place(&mut z);
        assert!((z[0] - 0.5).abs() < 1e-12 && z[2] < 1e-300);
    }

    #[test]
    fn argmax_prefers_first_on_tie() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.5, 0.3]), 1);
    }

    #[test]
    fn zero_output_layer_is_uniform() {
        let net = Mlp::new(&[3, 4, 4, 5], Activation::Tanh, 1).unwrap();
        let p = net.probs(&[0.3, -2.0, 1.0]);
        assert!(p.iter().all(|&v| (v - 0.2).abs() < 1e-12));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut net = Mlp::new(&[3, 4, 2], Activation::Tanh, 3).unwrap();
        // move the output layer off zero so every gradient path is exercised
        for (k, p) in net.params_mut().enumerate() {
            *p += 0.1 * ((k as f64) * 0.7).sin();
        }
        let xs = [
            vec![0.5, -1.0, 0.2],
            vec![-0.3, 0.8, 1.5],
            vec![1.0, 0.1, -0.7],
        ];
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let hard = [0usize, 1, 1];
        assert!(gradcheck::max_relative_error(&net, &inputs, Targets::Hard(&hard)) < 1e-4);
        let soft = vec![vec![0.3, 0.7], vec![1.0, 0.0], vec![0.5, 0.5]];
        assert!(gradcheck::max_relative_error(&net, &inputs, Targets::Soft(&soft)) < 1e-4);
    }

    #[test]
    fn relu_network_gradients_match() {
        let mut net = Mlp::new(&[3, 4, 4, 2], Activation::Relu, 11).unwrap();
        for (k, p) in net.params_mut().enumerate() {
            *p += 0.2 * ((k as f64) * 1.3).cos();
        }
        let xs = [vec![0.5, -1.0, 0.2], vec![-0.3, 0.8, 1.5]];
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let hard = [0usize, 1];
        assert!(gradcheck::max_relative_error(&net, &inputs, Targets::Hard(&hard)) < 1e-4);
    }

    #[test]
    fn fit_rejects_empty_and_bad_settings() {
        let mut net = Mlp::new(&[2, 2], Activation::Tanh, 0).unwrap();
        let s = TrainSettings {
            epochs: 1,
            batch_size: 1,
            learning_rate: 0.1,
        };
        assert!(net.fit(&[], Targets::Hard(&[]), &s, 0).is_err());
        let bad = TrainSettings {
            learning_rate: f64::NAN,
            ..s
        };
        assert!(net
            .fit(&[&[0.0, 1.0]], Targets::Hard(&[0]), &bad, 0)
            .is_err());
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut net = Mlp::new(&[1, 2], Activation::Tanh, 0).unwrap();
        let xs = [vec![1e200], vec![-1e200]];
        let inputs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let s = TrainSettings {
            epochs: 3,
            batch_size: 2,
            learning_rate: 1e200,
        };
        match net.fit(&inputs, Targets::Hard(&[0, 1]), &s, 0) {
            Err(Error::Training { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
