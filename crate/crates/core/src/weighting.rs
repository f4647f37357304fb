//! Estimate-then-modify weighting.
//!
//! A new learner's weight is first estimated AdaBoost-style from its weighted
//! error on the weak labels. The whole weight vector is then jittered with
//! Gaussian noise, and the candidate with the lowest exponential margin error
//! on the clean set wins. The unperturbed vector is always candidate 0, so
//! selection can never increase the clean error.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, LabelSpace};
use crate::error::{Error, Result};
use crate::par;

pub const ERR_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct DataWeights {
    w: Vec<f64>,
}

impl DataWeights {
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("data weights need at least one instance"));
        }
        Ok(Self {
            w: vec![1.0 / n as f64; n],
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

pub fn init_data_weights(n: usize) -> Result<DataWeights> {
    DataWeights::uniform(n)
}

/// Total weight on rows where `preds` disagrees with `weak`.
pub fn weighted_error(w: &DataWeights, preds: &[Label], weak: &[Label]) -> Result<f64> {
    if preds.len() != w.len() || weak.len() != w.len() {
        return Err(Error::validation(format!(
            "weighted error over {} weights, {} predictions, {} labels",
            w.len(),
            preds.len(),
            weak.len()
        )));
    }
    Ok(w.w
        .iter()
        .zip(preds.iter().zip(weak))
        .filter(|(_, (p, y))| p != y)
        .map(|(wi, _)| wi)
        .sum())
}

/// Weighted error under the data weights reweighted by `gate`, the member's
/// gate probability per row. Returns 0.5 when the gate puts no mass on any
/// weighted row.
pub fn gated_error(w: &DataWeights, gate: &[f64], preds: &[Label], weak: &[Label]) -> Result<f64> {
    if gate.len() != w.len() {
        return Err(Error::validation(format!(
            "{} gate values for {} weights",
            gate.len(),
            w.len()
        )));
    }
    if gate.iter().any(|q| !(*q >= 0.0)) {
        return Err(Error::validation("gate values must be nonnegative"));
    }
    let mass: f64 = w.w.iter().zip(gate).map(|(a, q)| a * q).sum();
    if !(mass > 0.0) {
        return Ok(0.5);
    }
    let scaled = DataWeights {
        w: w.w.iter().zip(gate).map(|(a, q)| a * q / mass).collect(),
    };
    weighted_error(&scaled, preds, weak)
}

/// `log((1 - err) / err)` with `err` clamped to `[1e-6, 1 - 1e-6]`.
pub fn estimate_alpha(err: f64) -> f64 {
    let e = err.clamp(ERR_CLAMP, 1.0 - ERR_CLAMP);
    ((1.0 - e) / e).ln()
}

/// Multiply mismatched rows by `exp(alpha)` and renormalize.
pub fn update_data_weights(
    w: &DataWeights,
    alpha: f64,
    preds: &[Label],
    weak: &[Label],
) -> Result<DataWeights> {
    if preds.len() != w.len() || weak.len() != w.len() {
        return Err(Error::validation(
            "data-weight update inputs differ in length",
        ));
    }
    // exp(alpha) for mismatches; shift by the larger factor so nothing overflows
    let (hit, miss) = if alpha >= 0.0 {
        ((-alpha).exp(), 1.0)
    } else {
        (1.0, alpha.exp())
    };
    let mut next: Vec<f64> =
        w.w.iter()
            .zip(preds.iter().zip(weak))
            .map(|(wi, (p, y))| wi * if p != y { miss } else { hit })
            .collect();
    let sum: f64 = next.iter().sum();
    if !(sum > 0.0 && sum.is_finite()) {
        return Err(Error::Internal(format!(
            "data weights collapsed (sum {sum})"
        )));
    }
    for v in &mut next {
        *v /= sum;
    }
    Ok(DataWeights { w: next })
}

/// Member weights aligned to ensemble order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(pub Vec<f64>);

impl WeightVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Negatives to zero, then scale to sum 1. A vector with no positive
    /// mass comes back uniform.
    pub fn clip_normalized(&self) -> WeightVector {
        let clipped: Vec<f64> = self.0.iter().map(|&a| a.max(0.0)).collect();
        let sum: f64 = clipped.iter().sum();
        if sum > 0.0 && sum.is_finite() {
            WeightVector(clipped.into_iter().map(|a| a / sum).collect())
        } else {
            WeightVector(vec![1.0 / self.0.len() as f64; self.0.len()])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbConfig {
    pub n_p: usize,
    pub mu: f64,
    /// Noise scale; `None` means `0.1 * mean(v)`.
    pub sigma: Option<f64>,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            n_p: 16,
            mu: 0.0,
            sigma: None,
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0 {
            return Err(Error::validation("n_p must be at least 1"));
        }
        if !self.mu.is_finite() {
            return Err(Error::validation("mu must be finite"));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::validation("sigma must be nonnegative"));
            }
        }
        Ok(())
    }

    pub fn sigma_for(&self, v: &WeightVector) -> f64 {
        self.sigma
            .unwrap_or_else(|| 0.1 * v.0.iter().sum::<f64>() / v.len().max(1) as f64)
            .max(0.0)
    }
}

const MAX_RESAMPLES: usize = 32;

/// Candidate 0 is `v` clip-normalized; the other `n_p` add i.i.d.
/// `N(mu, sigma^2)` noise per entry before clip-normalizing.
pub fn perturb_weights(
    v: &WeightVector,
    n_p: usize,
    mu: f64,
    sigma: f64,
    seed: u64,
) -> Result<Vec<WeightVector>> {
    if v.is_empty() {
        return Err(Error::validation("cannot perturb an empty weight vector"));
    }
    if n_p == 0 {
        return Err(Error::validation("n_p must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) || !mu.is_finite() {
        return Err(Error::validation(format!(
            "invalid noise N({mu}, {sigma}^2)"
        )));
    }
    let noise = Normal::new(mu, sigma).map_err(|e| Error::validation(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_p + 1);
    out.push(v.clip_normalized());
    for _ in 0..n_p {
        let mut accepted = None;
        for _ in 0..MAX_RESAMPLES {
            let cand: Vec<f64> =
                v.0.iter()
                    .map(|&a| (a + noise.sample(&mut rng)).max(0.0))
                    .collect();
            if cand.iter().sum::<f64>() > 0.0 {
                accepted = Some(WeightVector(cand).clip_normalized());
                break;
            }
        }
        out.push(accepted.unwrap_or_else(|| WeightVector(vec![1.0 / v.len() as f64; v.len()])));
    }
    Ok(out)
}

/// Per-member score contributions on a fixed dataset: for member m and
/// instance i, `gate_i[source_m] * f_m(x_i)` as a length-C row.
///
/// Any weight vector's ensemble scores are then a weighted sum of the
/// stored rows, so candidate evaluation never re-runs the learners.
#[derive(Debug, Clone, Default)]
pub struct ScoreTable {
    rows: usize,
    classes: usize,
    members: Vec<Vec<f64>>,
}

impl ScoreTable {
    pub fn new(rows: usize, classes: usize) -> Self {
        Self {
            rows,
            classes,
            members: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    /// `contrib` is row-major `rows x classes`.
    pub fn push(&mut self, contrib: Vec<f64>) -> Result<()> {
        if contrib.len() != self.rows * self.classes {
            return Err(Error::validation("member contribution has the wrong shape"));
        }
        self.members.push(contrib);
        Ok(())
    }

    /// Raw ensemble score row for instance `i`.
    pub fn combine_row(&self, weights: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.classes];
        let span = i * self.classes..(i + 1) * self.classes;
        for (m, &a) in self.members.iter().zip(weights) {
            if a == 0.0 {
                continue;
            }
            for (o, &c) in out.iter_mut().zip(&m[span.clone()]) {
                *o += a * c;
            }
        }
        out
    }

    /// Raw score rows for every instance.
    pub fn combine(&self, weights: &[f64]) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.combine_row(weights, i))
            .collect()
    }
}

/// Gold score minus the best other class score.
pub fn margin(scores: &[f64], gold: Label) -> f64 {
    let g = LabelSpace::index(gold);
    let other = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != g)
        .map(|(_, &s)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    scores[g] - other
}

/// Sum over instances of `exp(-margin)` on raw ensemble scores.
pub fn clean_error_of_scores(scores: &[Vec<f64>], gold: &[Label]) -> f64 {
    scores
        .iter()
        .zip(gold)
        .map(|(s, &y)| (-margin(s, y)).exp())
        .sum()
}

pub fn clean_error(table: &ScoreTable, weights: &WeightVector, gold: &[Label]) -> Result<f64> {
    if weights.len() != table.num_members() || gold.len() != table.rows() {
        return Err(Error::validation(format!(
            "clean error: {} weights for {} members, {} labels for {} rows",
            weights.len(),
            table.num_members(),
            gold.len(),
            table.rows()
        )));
    }
    let mut total = 0.0;
    for (i, &y) in gold.iter().enumerate() {
        total += (-margin(&table.combine_row(weights.as_slice(), i), y)).exp();
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub weights: WeightVector,
    pub errors: Vec<f64>,
}

/// Candidate with the lowest clean error; ties go to the lowest index.
pub fn select_weights(
    candidates: &[WeightVector],
    table: &ScoreTable,
    gold: &[Label],
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::validation("no weight candidates"));
    }
    let errors = par::map_slice(candidates, |c| clean_error(table, c, gold))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, &e) in errors.iter().enumerate().skip(1) {
        if e < errors[best] {
            best = i;
        }
    }
    Ok(Selection {
        index: best,
        weights: candidates[best].clone(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn init_examples() {
        assert_eq!(init_data_weights(4).unwrap().values(), &[0.25; 4]);
        assert_eq!(init_data_weights(1).unwrap().values(), &[1.0]);
        assert_eq!(
            init_data_weights(8).unwrap().values().iter().sum::<f64>(),
            1.0
        );
        assert!(init_data_weights(0).is_err());
    }

    #[test]
    fn weighted_error_examples() {
        let w = init_data_weights(4).unwrap();
        assert_eq!(
            weighted_error(&w, &[1, 2, 1, 2], &[1, 2, 1, 2]).unwrap(),
            0.0
        );
        assert_eq!(
            weighted_error(&w, &[2, 1, 2, 1], &[1, 2, 1, 2]).unwrap(),
            1.0
        );
        assert_eq!(
            weighted_error(&w, &[2, 2, 1, 2], &[1, 2, 1, 2]).unwrap(),
            0.25
        );
        assert!(weighted_error(&w, &[1], &[1, 2, 1, 2]).is_err());
    }

    #[test]
    fn gated_error_examples() {
        let w = init_data_weights(4).unwrap();
        let (p, y) = ([2, 2, 1, 1], [1, 2, 1, 2]);
        // constant gate gives the plain weighted error
        assert_eq!(gated_error(&w, &[0.3; 4], &p, &y).unwrap(), 0.5);
        // gate on the two correct rows only
        assert_eq!(gated_error(&w, &[0.0, 1.0, 1.0, 0.0], &p, &y).unwrap(), 0.0);
        // 1 * 1/4 wrong out of (1 + 3) / 4 mass
        let e = gated_error(&w, &[1.0, 3.0, 0.0, 0.0], &p, &y).unwrap();
        assert!((e - 0.25).abs() < 1e-15);
        assert_eq!(gated_error(&w, &[0.0; 4], &p, &y).unwrap(), 0.5);
        assert!(gated_error(&w, &[1.0; 3], &p, &y).is_err());
        assert!(gated_error(&w, &[-1.0; 4], &p, &y).is_err());
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(estimate_alpha(0.5), 0.0);
        assert!((estimate_alpha(0.25) - 3f64.ln()).abs() < 1e-12);
        assert!((estimate_alpha(0.0) - 13.8155).abs() < 1e-4);
        assert!(estimate_alpha(1.0) < -13.8);
    }

    #[test]
    fn update_examples() {
        let w = init_data_weights(3).unwrap();
        let same = update_data_weights(&w, 0.0, &[1, 2, 1], &[2, 2, 2]).unwrap();
        assert_eq!(same, w);
        let w2 = init_data_weights(2).unwrap();
        let next = update_data_weights(&w2, 3f64.ln(), &[1, 1], &[1, 2]).unwrap();
        assert!((next.values()[0] - 0.25).abs() < 1e-12);
        assert!((next.values()[1] - 0.75).abs() < 1e-12);
        let all = update_data_weights(&w, 2.0, &[1, 1, 1], &[2, 2, 2]).unwrap();
        for v in all.values() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn perturb_examples() {
        let v = WeightVector(vec![0.2, 0.3, 1.0]);
        let c = perturb_weights(&v, 5, 0.0, 0.0, 1).unwrap();
        assert_eq!(c.len(), 6);
        for cand in &c {
            assert_eq!(cand, &v.clip_normalized());
        }
        let one = WeightVector(vec![0.7]);
        for cand in perturb_weights(&one, 10, 0.0, 5.0, 2).unwrap() {
            assert_eq!(cand.0, vec![1.0]);
        }
        assert_eq!(
            perturb_weights(&v, 4, 0.0, 0.3, 9).unwrap(),
            perturb_weights(&v, 4, 0.0, 0.3, 9).unwrap()
        );
        assert!(perturb_weights(&v, 0, 0.0, 0.1, 0).is_err());
        assert!(perturb_weights(&v, 1, 0.0, -1.0, 0).is_err());
    }

    #[test]
    fn collapsed_candidates_fall_back_to_uniform() {
        // mean far below zero: every draw clips to all zeros
        let v = WeightVector(vec![0.5, 0.5]);
        let c = perturb_weights(&v, 2, -100.0, 0.001, 0).unwrap();
        assert_eq!(c[1].0, vec![0.5, 0.5]);
    }

    fn one_hot_table(correct: bool, n: usize) -> (ScoreTable, Vec<Label>) {
        let mut t = ScoreTable::new(n, 3);
        let gold: Vec<Label> = (0..n).map(|i| (i % 3) as Label + 1).collect();
        let mut rows = Vec::new();
        for &y in &gold {
            let mut r = vec![0.0; 3];
            let hit = if correct { y } else { y % 3 + 1 };
            r[LabelSpace::index(hit)] = 1.0;
            rows.extend(r);
        }
        t.push(rows).unwrap();
        (t, gold)
    }

    #[test]
    fn clean_error_examples() {
        let (t, gold) = one_hot_table(true, 6);
        let e = clean_error(&t, &WeightVector(vec![1.0]), &gold).unwrap();
        assert!((e - 6.0 * (-1.0f64).exp()).abs() < 1e-12);
        let mut u = ScoreTable::new(4, 2);
        u.push(vec![0.5; 8]).unwrap();
        let e = clean_error(&u, &WeightVector(vec![1.0]), &[1, 2, 1, 2]).unwrap();
        assert_eq!(e, 4.0);
        assert!(clean_error(&u, &WeightVector(vec![1.0, 0.0]), &[1, 2, 1, 2]).is_err());
    }

    #[test]
    fn binary_margin_matches_signed_form() {
        // with y in {-1,+1} and F = s2 - s1, exp(-y F) equals exp(-margin)
        for (s, gold) in [([0.2, 0.7], 2), ([0.9, 0.4], 2), ([0.3, 0.1], 1)] {
            let y: f64 = if gold == 2 { 1.0 } else { -1.0 };
            let signed = (-y * (s[1] - s[0])).exp();
            assert!((clean_error_of_scores(&[s.to_vec()], &[gold]) - signed).abs() < 1e-15);
        }
    }

    #[test]
    fn select_examples() {
        let (t, gold) = one_hot_table(true, 3);
        let single = vec![WeightVector(vec![1.0])];
        let s = select_weights(&single, &t, &gold).unwrap();
        assert_eq!(s.index, 0);
        let (mut t2, gold2) = one_hot_table(true, 3);
        let (bad, _) = one_hot_table(false, 3);
        t2.push(bad.members[0].clone()).unwrap();
        let cands = vec![
            WeightVector(vec![0.5, 0.5]),
            WeightVector(vec![0.9, 0.1]),
            WeightVector(vec![0.9, 0.1]),
        ];
        let s = select_weights(&cands, &t2, &gold2).unwrap();
        assert_eq!(s.index, 1);
        assert!(s.errors[1] <= s.errors[0]);
        assert!(select_weights(&[], &t2, &gold2).is_err());
    }

    proptest! {
        #[test]
        fn update_keeps_simplex(
            alpha in -20.0f64..20.0,
            pattern in proptest::collection::vec((1u32..=3, 1u32..=3, 0.01f64..1.0), 1..40),
        ) {
            let raw: Vec<f64> = pattern.iter().map(|p| p.2).collect();
            let s: f64 = raw.iter().sum();
            let w = DataWeights { w: raw.iter().map(|v| v / s).collect() };
            let preds: Vec<Label> = pattern.iter().map(|p| p.0).collect();
            let weak: Vec<Label> = pattern.iter().map(|p| p.1).collect();
            let next = update_data_weights(&w, alpha, &preds, &weak).unwrap();
            prop_assert!(next.values().iter().all(|&v| v >= 0.0));
            prop_assert!((next.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn alpha_strictly_decreasing(a in 1.1e-6f64..0.999_998, b in 1.1e-6f64..0.999_998) {
            prop_assume!(a < b);
            prop_assert!(estimate_alpha(a) > estimate_alpha(b));
        }

        #[test]
        fn candidates_on_simplex(
            v in proptest::collection::vec(-1.0f64..3.0, 1..12),
            sigma in 0.0f64..2.0,
            seed in any::<u64>(),
        ) {
            let cands = perturb_weights(&WeightVector(v), 8, 0.0, sigma, seed).unwrap();
            for c in cands {
                prop_assert!(c.0.iter().all(|&a| a >= 0.0));
                prop_assert!((c.0.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }
}
