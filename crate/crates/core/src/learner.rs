//! Base learners: probabilistic classifiers trained by cross-entropy on weak labels.

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, LabelSpace};
use crate::error::{Error, Result};
use crate::nn::{argmax, Activation, Mlp, Targets, TrainSettings};

/// Anything that maps a feature vector to a probability vector over classes.
pub trait ScoreModel {
    fn num_classes(&self) -> usize;

    /// Length-C probability vector.
    fn scores(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Argmax of [`ScoreModel::scores`] as a 1-based label.
    fn label(&self, x: &[f64]) -> Result<Label> {
        Ok(LabelSpace::label(argmax(&self.scores(x)?)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Single weight matrix plus bias under a softmax.
    Linear,
    /// One hidden layer of `hidden_width` units.
    Hidden,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    #[serde(default = "default_hidden")]
    pub hidden_width: usize,
    #[serde(default)]
    pub activation: Activation,
    pub train: TrainSettings,
}

fn default_hidden() -> usize {
    32
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            kind: LearnerKind::Linear,
            hidden_width: default_hidden(),
            activation: Activation::Tanh,
            train: TrainSettings {
                epochs: 30,
                batch_size: 32,
                learning_rate: 0.1,
            },
        }
    }
}

impl LearnerConfig {
    pub fn widths(&self, dim: usize, classes: usize) -> Vec<usize> {
        match self.kind {
            LearnerKind::Linear => vec![dim, classes],
            LearnerKind::Hidden => vec![dim, self.hidden_width, classes],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLearner {
    pub label_space: LabelSpace,
    pub net: Mlp,
}

impl BaseLearner {
    /// An untrained learner; its output layer is zero, so scores are uniform.
    pub fn untrained(
        dim: usize,
        label_space: LabelSpace,
        config: &LearnerConfig,
        seed: u64,
    ) -> Result<Self> {
        let net = Mlp::new(
            &config.widths(dim, label_space.num_classes()),
            config.activation,
            seed,
        )?;
        Ok(Self { label_space, net })
    }

    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn predict_scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::validation(format!(
                "learner expects dimension {}, got {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(self.net.probs(x))
    }

    pub fn predict_label(&self, x: &[f64]) -> Result<Label> {
        Ok(LabelSpace::label(argmax(&self.predict_scores(x)?)))
    }
}

impl ScoreModel for BaseLearner {
    fn num_classes(&self) -> usize {
        self.label_space.num_classes()
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_scores(x)
    }
}

/// Result of [`train_base`]: the learner plus its loss trajectory.
#[derive(Debug, Clone)]
pub struct Trained {
    pub learner: BaseLearner,
    pub loss_history: Vec<f64>,
}

/// Fit a learner on `(inputs[i], labels[i])` pairs; labels must be classes.
pub fn train_base(
    inputs: &[&[f64]],
    labels: &[Label],
    label_space: LabelSpace,
    config: &LearnerConfig,
    seed: u64,
) -> Result<Trained> {
    if inputs.is_empty() {
        return Err(Error::validation("base learner region is empty"));
    }
    if inputs.len() != labels.len() {
        return Err(Error::validation(
            "region inputs and labels differ in length",
        ));
    }
    if let Some(&y) = labels.iter().find(|&&y| !label_space.is_class(y)) {
        return Err(Error::validation(format!(
            "region label {y} is not a class (abstain rows must be excluded)"
        )));
    }
    let dim = inputs[0].len();
    if inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::validation("region has mixed feature dimensions"));
    }
    let mut learner = BaseLearner::untrained(dim, label_space, config, seed)?;
    let targets: Vec<usize> = labels.iter().map(|&y| LabelSpace::index(y)).collect();
    let loss_history = learner.net.fit(
        inputs,
        Targets::Hard(&targets),
        &config.train,
        seed.wrapping_add(0x9e37_79b9),
    )?;
    Ok(Trained {
        learner,
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..n {
            let y: Label = if i % 2 == 0 { 1 } else { 2 };
            let c = if y == 1 { -3.0 } else { 3.0 };
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            xs.push(vec![c + 0.5 * a, 0.5 * b]);
            ys.push(y);
        }
        (xs, ys)
    }

    /// Perceptron run to convergence: an independent witness that the blobs
    /// really are linearly separable.
    fn perceptron_separates(xs: &[Vec<f64>], ys: &[Label]) -> bool {
        let mut w = [0.0; 3];
        for _ in 0..1000 {
            let mut mistakes = 0;
            for (x, &y) in xs.iter().zip(ys) {
                let s = if y == 2 { 1.0 } else { -1.0 };
                let f = w[0] * x[0] + w[1] * x[1] + w[2];
                if s * f <= 0.0 {
                    w[0] += s * x[0];
                    w[1] += s * x[1];
                    w[2] += s;
                    mistakes += 1;
                }
            }
            if mistakes == 0 {
                return true;
            }
        }
        false
    }

    fn refs(xs: &[Vec<f64>]) -> Vec<&[f64]> {
        xs.iter().map(Vec::as_slice).collect()
    }

    #[test]
    fn separable_blobs_train_to_high_accuracy() {
        let (xs, ys) = blobs(400, 5);
        assert!(perceptron_separates(&xs, &ys));
        let space = LabelSpace::new(2).unwrap();
        let t = train_base(&refs(&xs), &ys, space, &LearnerConfig::default(), 1).unwrap();
        let correct = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| t.learner.predict_label(x).unwrap() == y)
            .count();
        assert!(correct as f64 / xs.len() as f64 >= 0.99);
        assert!(t.loss_history.last().unwrap() <= &t.loss_history[1]);
    }

    #[test]
    fn single_class_region_predicts_that_class() {
        let xs = vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![-2.0, 0.5]];
        let space = LabelSpace::new(3).unwrap();
        let t = train_base(&refs(&xs), &[3, 3, 3], space, &LearnerConfig::default(), 0).unwrap();
        for x in &xs {
            assert_eq!(t.learner.predict_label(x).unwrap(), 3);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let (xs, ys) = blobs(100, 2);
        let space = LabelSpace::new(2).unwrap();
        let cfg = LearnerConfig {
            kind: LearnerKind::Hidden,
            hidden_width: 8,
            ..LearnerConfig::default()
        };
        let a = train_base(&refs(&xs), &ys, space, &cfg, 9).unwrap();
        let b = train_base(&refs(&xs), &ys, space, &cfg, 9).unwrap();
        assert_eq!(a.learner, b.learner);
    }

    #[test]
    fn rejects_empty_and_abstain() {
        let space = LabelSpace::new(2).unwrap();
        let cfg = LearnerConfig::default();
        assert!(train_base(&[], &[], space, &cfg, 0).is_err());
        assert!(train_base(&[&[1.0][..]], &[0], space, &cfg, 0).is_err());
    }

    #[test]
    fn zero_initialized_linear_is_uniform() {
        let space = LabelSpace::new(4).unwrap();
        let l = BaseLearner::untrained(3, space, &LearnerConfig::default(), 0).unwrap();
        let s = l.predict_scores(&[1.0, -5.0, 2.0]).unwrap();
        assert!(s.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert_eq!(l.predict_label(&[1.0, -5.0, 2.0]).unwrap(), 1);
        assert!(l.predict_scores(&[1.0]).is_err());
    }

    #[test]
    fn label_examples() {
        assert_eq!(LabelSpace::label(argmax(&[0.2, 0.5, 0.3])), 2);
        assert_eq!(LabelSpace::label(argmax(&[0.5, 0.5])), 1);
        assert_eq!(LabelSpace::label(argmax(&[0.0, 1.0, 0.0])), 2);
    }

    #[test]
    fn cross_entropy_gradients_match_finite_differences() {
        let space = LabelSpace::new(2).unwrap();
        for kind in [LearnerKind::Linear, LearnerKind::Hidden] {
            let cfg = LearnerConfig {
                kind,
                hidden_width: 4,
                ..LearnerConfig::default()
            };
            let mut l = BaseLearner::untrained(3, space, &cfg, 4).unwrap();
            for (k, p) in l.net.params_mut().enumerate() {
                *p += 0.3 * ((k as f64) * 0.9).sin();
            }
            let xs = vec![
                vec![0.2, -0.4, 1.0],
                vec![1.1, 0.3, -0.2],
                vec![-0.5, 0.9, 0.4],
            ];
            let err = gradcheck::max_relative_error(&l.net, &refs(&xs), Targets::Hard(&[0, 1, 0]));
            assert!(err < 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn full_batch_small_step_loss_is_monotone() {
        let (xs, ys) = blobs(60, 8);
        let space = LabelSpace::new(2).unwrap();
        // Lipschitz bound of the softmax CE gradient is at most max ||[x,1]||^2 / 2
        let lmax = xs
            .iter()
            .map(|x| x.iter().map(|v| v * v).sum::<f64>() + 1.0)
            .fold(0.0, f64::max);
        let cfg = LearnerConfig {
            train: TrainSettings {
                epochs: 50,
                batch_size: xs.len(),
                learning_rate: 1.0 / lmax,
            },
            ..LearnerConfig::default()
        };
        let t = train_base(&refs(&xs), &ys, space, &cfg, 0).unwrap();
        for w in t.loss_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{:?}", t.loss_history);
        }
    }

    proptest! {
        #[test]
        fn label_invariant_under_temperature(
            logits in proptest::collection::vec(-5.0f64..5.0, 2..6),
            temp in 0.05f64..20.0,
        ) {
            let mut a = logits.clone();
            crate::nn::softmax_in_place(&mut a);
            let mut b: Vec<f64> = logits.iter().map(|z| z / temp).collect();
            crate::nn::softmax_in_place(&mut b);
            prop_assert_eq!(argmax(&a), argmax(&b));
        }

        #[test]
        fn scores_on_simplex(x in proptest::collection::vec(-10.0f64..10.0, 3), seed in 0u64..50) {
            let (xs, ys) = blobs(20, seed);
            let xs: Vec<Vec<f64>> = xs.into_iter().map(|mut v| { v.push(0.0); v }).collect();
            let space = LabelSpace::new(2).unwrap();
            let t = train_base(&refs(&xs), &ys, space, &LearnerConfig::default(), seed).unwrap();
            let s = t.learner.predict_scores(&x).unwrap();
            prop_assert!(s.iter().all(|&v| v >= 0.0));
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            prop_assert_eq!(LabelSpace::label(argmax(&s)), t.learner.predict_label(&x).unwrap());
        }
    }
}
