//! Error-guided localization.
//!
//! The clean set accumulates a per-instance error vector across rounds. The
//! k worst clean instances become anchors, and each anchor pulls a ball of
//! weakly labeled instances whose radius shrinks as its error grows. The
//! union of those balls is the next base learner's training region.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, LabelSpace};
use crate::error::{Error, Result};
use crate::nn::argmax;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorIncrement {
    /// `1 - score[gold]` on normalized ensemble scores.
    #[default]
    Soft,
    /// 1 when the argmax misses the gold label, else 0.
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorMatrix {
    values: Vec<f64>,
}

impl ErrorMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn all_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Add one round of errors. `scores` holds one normalized score row per
    /// clean instance.
    pub fn update(
        &mut self,
        scores: &[Vec<f64>],
        gold: &[Label],
        mode: ErrorIncrement,
    ) -> Result<()> {
        if scores.len() != self.values.len() || gold.len() != self.values.len() {
            return Err(Error::validation(format!(
                "error matrix has {} entries, got {} score rows and {} labels",
                self.values.len(),
                scores.len(),
                gold.len()
            )));
        }
        for ((m, row), &y) in self.values.iter_mut().zip(scores).zip(gold) {
            let g = LabelSpace::index(y);
            if g >= row.len() {
                return Err(Error::validation(format!(
                    "gold label {y} outside score row"
                )));
            }
            let inc = match mode {
                ErrorIncrement::Soft => (1.0 - row[g]).clamp(0.0, 1.0),
                ErrorIncrement::Hard => f64::from(u8::from(argmax(row) != g)),
            };
            *m += inc;
        }
        Ok(())
    }
}

/// Indices of the k largest entries, largest first; ties go to the smaller index.
pub fn top_k_errors(m: &ErrorMatrix, k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > m.len() {
        return Err(Error::validation(format!(
            "k = {k} outside 1..={}",
            m.len()
        )));
    }
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| m.values[b].total_cmp(&m.values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDistance {
    pub mean: f64,
    /// Number of sampled pairs, or `None` when every pair was visited.
    pub sampled_pairs: Option<usize>,
}

pub const DEFAULT_EXACT_THRESHOLD: usize = 2000;

/// Mean Euclidean distance over unordered pairs. Exact up to
/// `exact_threshold` points, otherwise estimated from `threshold^2 / 2`
/// seeded uniform pairs.
pub fn avg_pairwise_distance(
    features: &[&[f64]],
    exact_threshold: usize,
    seed: u64,
) -> Result<PairwiseDistance> {
    let n = features.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "average distance needs at least 2 points, got {n}"
        )));
    }
    if n <= exact_threshold {
        let row_sums = par::map_range(n, |i| {
            features[i + 1..]
                .iter()
                .map(|x| euclidean(features[i], x))
                .sum::<f64>()
        });
        let total: f64 = row_sums.into_iter().sum();
        let pairs = n as f64 * (n as f64 - 1.0) / 2.0;
        return Ok(PairwiseDistance {
            mean: total / pairs,
            sampled_pairs: None,
        });
    }
    let count = (exact_threshold * exact_threshold / 2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(usize, usize)> = (0..count)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect();
    let dists = par::map_slice(&pairs, |&(a, b)| euclidean(features[a], features[b]));
    Ok(PairwiseDistance {
        mean: dists.into_iter().sum::<f64>() / count as f64,
        sampled_pairs: Some(count),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterSample {
    /// Indices into the searched set, ascending.
    pub members: Vec<usize>,
    /// True when the ball was empty and the nearest neighbors were taken instead.
    pub fallback: bool,
}

pub const DEFAULT_MIN_CLUSTER: usize = 32;

/// Members of `candidates` within `radius` of `anchor`. An empty ball is
/// replaced by the `n_min` nearest candidates (capped at the pool size).
pub fn sample_cluster(
    anchor: &[f64],
    features: &[&[f64]],
    candidates: &[usize],
    radius: f64,
    n_min: usize,
) -> Result<ClusterSample> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::validation(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    if candidates.is_empty() {
        return Err(Error::validation("no candidate instances to sample from"));
    }
    let dists = par::map_slice(candidates, |&i| euclidean(anchor, features[i]));
    let mut members: Vec<usize> = candidates
        .iter()
        .zip(&dists)
        .filter(|(_, &d)| d <= radius)
        .map(|(&i, _)| i)
        .collect();
    if !members.is_empty() {
        members.sort_unstable();
        return Ok(ClusterSample {
            members,
            fallback: false,
        });
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        dists[a]
            .total_cmp(&dists[b])
            .then(candidates[a].cmp(&candidates[b]))
    });
    let take = n_min.max(1).min(candidates.len());
    let mut members: Vec<usize> = order[..take].iter().map(|&j| candidates[j]).collect();
    members.sort_unstable();
    Ok(ClusterSample {
        members,
        fallback: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizeConfig {
    pub k: usize,
    pub c1: f64,
    #[serde(default = "default_min_cluster")]
    pub n_min: usize,
    #[serde(default = "default_exact")]
    pub exact_threshold: usize,
    #[serde(default)]
    pub increment: ErrorIncrement,
}

fn default_min_cluster() -> usize {
    DEFAULT_MIN_CLUSTER
}

fn default_exact() -> usize {
    DEFAULT_EXACT_THRESHOLD
}

impl Default for LocalizeConfig {
    fn default() -> Self {
        Self {
            k: 5,
            c1: 4.0,
            n_min: DEFAULT_MIN_CLUSTER,
            exact_threshold: DEFAULT_EXACT_THRESHOLD,
            increment: ErrorIncrement::Soft,
        }
    }
}

impl LocalizeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::validation("c1 must be positive"));
        }
        if self.n_min == 0 || self.exact_threshold < 2 {
            return Err(Error::validation(
                "n_min must be positive and exact_threshold at least 2",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRegion {
    /// Deduplicated indices into the weak set, ascending.
    pub members: Vec<usize>,
    /// Clean-set indices of the anchors, worst first.
    pub anchors: Vec<usize>,
    pub radii: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub fallback: Vec<bool>,
}

/// `radius = c1 * d / error`. Inverse in the accumulated error.
pub fn anchor_radius(c1: f64, d: f64, error: f64) -> f64 {
    c1 * d / error
}

/// Build the training region for the next learner.
///
/// Anchors with zero accumulated error are skipped (their radius would be
/// infinite). Returns `Ok(None)` when no clean instance has any error.
pub fn build_local_region(
    m: &ErrorMatrix,
    weak_features: &[&[f64]],
    candidates: &[usize],
    clean_features: &[&[f64]],
    config: &LocalizeConfig,
    d: f64,
) -> Result<Option<LocalRegion>> {
    config.validate()?;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::validation(format!(
            "average distance must be positive, got {d}"
        )));
    }
    if clean_features.len() != m.len() {
        return Err(Error::validation(
            "error matrix and clean set differ in length",
        ));
    }
    let positive = m.values.iter().filter(|&&v| v > 0.0).count();
    if positive == 0 {
        return Ok(None);
    }
    let anchors = top_k_errors(m, config.k.min(positive))?;
    let mut region = LocalRegion {
        members: Vec::new(),
        anchors: anchors.clone(),
        radii: Vec::with_capacity(anchors.len()),
        cluster_sizes: Vec::with_capacity(anchors.len()),
        fallback: Vec::with_capacity(anchors.len()),
    };
    for &a in &anchors {
        let radius = anchor_radius(config.c1, d, m.values[a]);
        let s = sample_cluster(
            clean_features[a],
            weak_features,
            candidates,
            radius,
            config.n_min,
        )?;
        region.radii.push(radius);
        region.cluster_sizes.push(s.members.len());
        region.fallback.push(s.fallback);
        region.members.extend(s.members);
    }
    region.members.sort_unstable();
    region.members.dedup();
    Ok(Some(region))
}
