//! The two-dimensional boosting loop and the gated ensemble predictor.
//!
//! The ensemble scores an input as
//! `sum_m weight[m] * gate(x)[source_m] * learner_m(x)`, where each member
//! was fitted in round `(t, l)`: `t` is the outer (intra-source) iteration
//! and `l` the inner (inter-source) index.

mod prop1;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use prop1::{prop1_counterexample, Prop1Report};

use crate::condfn::{CondFn, Gate};
use crate::datamodel::{CleanSet, Label, LabelSpace, WeakLabeledSet};
use crate::error::{Error, Result};
use crate::learner::{train_base, BaseLearner, LearnerConfig};
use crate::localize::{
    avg_pairwise_distance, build_local_region, ErrorMatrix, LocalRegion, LocalizeConfig,
    PairwiseDistance,
};
use crate::metrics::compute_metrics;
use crate::nn::argmax;
use crate::par;
use crate::seeds::{self, tag};
use crate::weighting::{
    clean_error, estimate_alpha, gated_error, init_data_weights, perturb_weights, select_weights,
    update_data_weights, weighted_error, PerturbConfig, ScoreTable, WeightVector,
};

pub const ENSEMBLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    /// Outer iteration, 1-based.
    pub t: usize,
    /// Weak source, 1-based.
    pub l: usize,
    pub learner: BaseLearner,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub version: u32,
    pub label_space: LabelSpace,
    pub members: Vec<Member>,
    pub weights: WeightVector,
    pub gate: Gate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleScores {
    pub raw: Vec<f64>,
    /// `raw` divided by its sum; uniform when no member has gate mass at x.
    pub normalized: Vec<f64>,
}

/// Features (and, when available, LF rows) of instances to score.
#[derive(Debug, Clone)]
pub struct Batch<'a> {
    pub features: Vec<&'a [f64]>,
    pub lf_rows: Option<Vec<&'a [Label]>>,
}

impl<'a> Batch<'a> {
    pub fn from_clean(set: &'a CleanSet) -> Self {
        Self {
            features: set
                .instances()
                .iter()
                .map(|x| x.features.as_slice())
                .collect(),
            lf_rows: set.lf_rows().map(|r| r.iter().map(Vec::as_slice).collect()),
        }
    }

    /// Rows `idx` of a weak set; its weak labels double as LF rows.
    pub fn from_weak_rows(set: &'a WeakLabeledSet, idx: &[usize]) -> Self {
        Self {
            features: idx.iter().map(|&i| set.features(i)).collect(),
            lf_rows: Some(
                idx.iter()
                    .map(|&i| set.weak_labels()[i].as_slice())
                    .collect(),
            ),
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn lf_row(&self, i: usize) -> Option<&[Label]> {
        self.lf_rows.as_ref().map(|r| r[i])
    }
}

fn normalize_scores(raw: &[f64]) -> Vec<f64> {
    let sum: f64 = raw.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        raw.iter().map(|v| v / sum).collect()
    } else {
        vec![1.0 / raw.len() as f64; raw.len()]
    }
}

impl Ensemble {
    pub fn num_classes(&self) -> usize {
        self.label_space.num_classes()
    }

    pub fn ensemble_scores(&self, x: &[f64], lf_row: Option<&[Label]>) -> Result<EnsembleScores> {
        if self.members.len() != self.weights.len() {
            return Err(Error::validation(
                "ensemble members and weights differ in length",
            ));
        }
        let gate = self.gate.eval(x, lf_row)?;
        let mut raw = vec![0.0; self.num_classes()];
        for (m, &a) in self.members.iter().zip(self.weights.as_slice()) {
            let q = gate[m.l - 1];
            if a == 0.0 || q == 0.0 {
                continue;
            }
            let s = m.learner.predict_scores(x)?;
            for (r, v) in raw.iter_mut().zip(s) {
                *r += a * q * v;
            }
        }
        let normalized = normalize_scores(&raw);
        Ok(EnsembleScores { raw, normalized })
    }

    pub fn predict(&self, x: &[f64], lf_row: Option<&[Label]>) -> Result<Label> {
        let s = self.ensemble_scores(x, lf_row)?;
        Ok(LabelSpace::label(argmax(&s.raw)))
    }

    pub fn predict_batch(&self, batch: &Batch<'_>) -> Result<Vec<Label>> {
        par::map_range(batch.len(), |i| {
            self.predict(batch.features[i], batch.lf_row(i))
        })
        .into_iter()
        .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let e: Ensemble = serde_json::from_str(&text)?;
        if e.version != ENSEMBLE_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported ensemble version {}",
                e.version
            )));
        }
        if e.members.is_empty() || e.members.len() != e.weights.len() {
            return Err(Error::validation(
                "ensemble needs matching nonempty members and weights",
            ));
        }
        if e.members
            .iter()
            .any(|m| m.l == 0 || m.l > e.gate.num_sources())
        {
            return Err(Error::validation("member source index outside the gate"));
        }
        for m in &e.members {
            m.learner.net.check_shapes()?;
        }
        Ok(e)
    }
}

/// Which ablation of the full method to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Full,
    /// Constant uniform gate.
    NoCondFn,
    /// Gate from each instance's normalized LF matches.
    HardMatching,
    /// Keep the weak-label estimate, skip perturbation and selection.
    WeakOnlyWeights,
    /// Weights computed on the clean set alone.
    IntegratedMode,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoCondFn,
        Variant::HardMatching,
        Variant::WeakOnlyWeights,
        Variant::IntegratedMode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoCondFn => "no_cond_fn",
            Variant::HardMatching => "hard_matching",
            Variant::WeakOnlyWeights => "weak_only_weights",
            Variant::IntegratedMode => "integrated_mode",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// How the running weight vector is carried into the next round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightCarry {
    /// Keep the selected (sum-1) vector and append the raw new estimate.
    #[default]
    Normalized,
    /// Rescale the selected vector to the running sum of accepted raw
    /// estimates before appending the new one.
    RawScale,
}

/// Which data-weight distribution the weak-label error of a new member is
/// measured under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaScope {
    /// The data weights as they stand.
    #[default]
    WeakSet,
    /// The data weights reweighted by the member's gate probability.
    Gated,
}

/// How integrated mode sets a new member's weight from the clean set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratedWeights {
    /// The log-odds estimate with data weights kept on the clean set.
    #[serde(rename = "adaboost")]
    AdaBoost,
    /// Grid search over the new member's share of the weight vector,
    /// minimizing clean exponential error.
    #[default]
    Grid,
}

/// Which weak instances a round's clusters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionPool {
    /// Every weak instance with an aggregated label.
    #[default]
    AllLabeled,
    /// Only labeled instances matched by the round's source `l`.
    SourceMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostConfig {
    /// Outer iterations T.
    pub rounds: usize,
    pub localize: LocalizeConfig,
    #[serde(default)]
    pub perturb: PerturbConfig,
    pub learner: LearnerConfig,
    /// Data-weight update from the newest learner instead of the ensemble.
    #[serde(default)]
    pub classic_update: bool,
    #[serde(default)]
    pub weight_carry: WeightCarry,
    #[serde(default)]
    pub region_pool: RegionPool,
    #[serde(default)]
    pub alpha_scope: AlphaScope,
    #[serde(default)]
    pub integrated: IntegratedWeights,
    /// Grid resolution for [`IntegratedWeights::Grid`].
    #[serde(default = "default_grid")]
    pub integrated_grid: usize,
}

fn default_grid() -> usize {
    100
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            localize: LocalizeConfig::default(),
            perturb: PerturbConfig::default(),
            learner: LearnerConfig::default(),
            classic_update: false,
            weight_carry: WeightCarry::Normalized,
            region_pool: RegionPool::AllLabeled,
            alpha_scope: AlphaScope::WeakSet,
            integrated: IntegratedWeights::Grid,
            integrated_grid: default_grid(),
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::validation("rounds (T) must be at least 1"));
        }
        if self.integrated_grid == 0 {
            return Err(Error::validation("integrated_grid must be positive"));
        }
        self.localize.validate()?;
        self.perturb.validate()?;
        self.learner.train.validate()
    }
}

/// One completed `(t, l)` round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub l: usize,
    pub clean_acc: f64,
    pub clean_f1: f64,
    pub region_size: usize,
    /// Log-odds estimate before modification; absent for the grid search.
    pub alpha_est: Option<f64>,
    /// Final (normalized) weight of the new member.
    pub alpha_final: f64,
    pub weighted_error: Option<f64>,
    pub candidate_errors: Vec<f64>,
    pub selected: usize,
    pub clean_error: f64,
    pub anchors: Vec<usize>,
    pub radii: Vec<f64>,
    pub cluster_sizes: Vec<usize>,
    pub fallback: Vec<bool>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitRecord {
    pub clean_acc: f64,
    pub clean_f1: f64,
    pub clean_error: f64,
    pub train_size: usize,
    pub avg_distance: PairwiseDistance,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ensemble: Ensemble,
    pub init: InitRecord,
    pub rounds: Vec<RoundRecord>,
    /// True when boosting stopped because every clean error was zero.
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum WeightMode {
    EstimateThenModify,
    EstimateOnly,
    CleanOnly,
}

/// Gate probabilities for every instance of a batch (`n x p`).
fn gate_matrix(gate: &Gate, batch: &Batch<'_>) -> Result<Vec<Vec<f64>>> {
    par::map_range(batch.len(), |i| {
        gate.eval(batch.features[i], batch.lf_row(i))
    })
    .into_iter()
    .collect()
}

/// Learner scores on a batch, scaled per row by the member's gate column.
fn contributions(
    learner: &BaseLearner,
    source: usize,
    batch: &Batch<'_>,
    gates: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let rows = par::map_range(batch.len(), |i| {
        let q = gates[i][source - 1];
        learner
            .predict_scores(batch.features[i])
            .map(|s| s.into_iter().map(|v| q * v).collect::<Vec<f64>>())
    });
    let mut flat = Vec::with_capacity(batch.len() * learner.label_space.num_classes());
    for r in rows {
        flat.extend(r?);
    }
    Ok(flat)
}

fn table_predictions(table: &ScoreTable, weights: &[f64]) -> Vec<Label> {
    par::map_range(table.rows(), |i| {
        LabelSpace::label(argmax(&table.combine_row(weights, i)))
    })
}

fn learner_predictions(learner: &BaseLearner, batch: &Batch<'_>) -> Result<Vec<Label>> {
    par::map_range(batch.len(), |i| learner.predict_label(batch.features[i]))
        .into_iter()
        .collect()
}

struct CleanEval {
    acc: f64,
    f1: f64,
    error: f64,
    normalized: Vec<Vec<f64>>,
}

fn evaluate_clean(
    table: &ScoreTable,
    weights: &WeightVector,
    gold: &[Label],
    space: LabelSpace,
) -> Result<CleanEval> {
    let raw = table.combine(weights.as_slice());
    let preds: Vec<Label> = raw.iter().map(|r| LabelSpace::label(argmax(r))).collect();
    let m = compute_metrics(&preds, gold, space)?;
    Ok(CleanEval {
        acc: m.accuracy,
        f1: m.macro_f1,
        error: clean_error(table, weights, gold)?,
        normalized: raw.iter().map(|r| normalize_scores(r)).collect(),
    })
}

/// Train the single learner used both as the first ensemble member and as
/// the majority-vote baseline: every labeled weak row with its aggregated label.
pub fn train_on_aggregated(
    dl: &WeakLabeledSet,
    config: &LearnerConfig,
    seed: u64,
) -> Result<BaseLearner> {
    let agg = dl
        .aggregated()
        .ok_or_else(|| Error::validation("weak set has no aggregated labels"))?;
    let rows = dl.labeled_rows();
    if rows.is_empty() {
        return Err(Error::validation("no weak row carries an aggregated label"));
    }
    let inputs: Vec<&[f64]> = rows.iter().map(|&i| dl.features(i)).collect();
    let labels: Vec<Label> = rows.iter().map(|&i| agg[i]).collect();
    Ok(train_base(&inputs, &labels, dl.label_space(), config, seed)?.learner)
}

pub fn run_localboost(
    dl: &WeakLabeledSet,
    dc: &CleanSet,
    gate: Gate,
    config: &BoostConfig,
    seed: u64,
) -> Result<RunOutput> {
    run_with(dl, dc, gate, WeightMode::EstimateThenModify, config, seed)
}

/// Run one ablation. `cond_fn` is the trained gate used by the variants that
/// keep it.
pub fn run_ablation(
    variant: Variant,
    dl: &WeakLabeledSet,
    dc: &CleanSet,
    cond_fn: &CondFn,
    config: &BoostConfig,
    seed: u64,
) -> Result<RunOutput> {
    let p = dl.num_sources();
    let learned = || Gate::Learned {
        cond_fn: cond_fn.clone(),
    };
    let (gate, mode) = match variant {
        Variant::Full => (learned(), WeightMode::EstimateThenModify),
        Variant::NoCondFn => (
            Gate::Uniform { num_sources: p },
            WeightMode::EstimateThenModify,
        ),
        Variant::HardMatching => (
            Gate::HardMatching { num_sources: p },
            WeightMode::EstimateThenModify,
        ),
        Variant::WeakOnlyWeights => (learned(), WeightMode::EstimateOnly),
        Variant::IntegratedMode => (learned(), WeightMode::CleanOnly),
    };
    run_with(dl, dc, gate, mode, config, seed)
}

fn run_with(
    dl: &WeakLabeledSet,
    dc: &CleanSet,
    gate: Gate,
    mode: WeightMode,
    config: &BoostConfig,
    seed: u64,
) -> Result<RunOutput> {
    config.validate()?;
    let space = dl.label_space();
    if dc.label_space() != space {
        return Err(Error::validation(
            "weak and clean sets use different label spaces",
        ));
    }
    if dc.dim() != dl.dim() {
        return Err(Error::validation(
            "weak and clean sets differ in feature dimension",
        ));
    }
    let p = dl.num_sources();
    if gate.num_sources() != p {
        return Err(Error::validation(format!(
            "gate covers {} sources, weak set has {p}",
            gate.num_sources()
        )));
    }
    let agg = dl
        .aggregated()
        .ok_or_else(|| Error::validation("weak set has no aggregated labels"))?;
    let labeled = dl.labeled_rows();
    if labeled.is_empty() {
        return Err(Error::validation("no weak row carries an aggregated label"));
    }
    let weak_labels: Vec<Label> = labeled.iter().map(|&i| agg[i]).collect();
    let gold = dc.gold_labels();
    let c = space.num_classes();

    let all_features: Vec<&[f64]> = (0..dl.len()).map(|i| dl.features(i)).collect();
    let d = avg_pairwise_distance(
        &all_features,
        config.localize.exact_threshold,
        seeds::derive(seed, &[tag::DISTANCE]),
    )?;
    if !(d.mean > 0.0) {
        return Err(Error::validation("weak instances are all identical"));
    }

    let weak_batch = Batch::from_weak_rows(dl, &labeled);
    let clean_batch = Batch::from_clean(dc);
    let weak_gates = gate_matrix(&gate, &weak_batch)?;
    let clean_gates = gate_matrix(&gate, &clean_batch)?;
    let pools: Vec<Vec<usize>> = match config.region_pool {
        RegionPool::AllLabeled => vec![labeled.clone()],
        RegionPool::SourceMatched => (0..p)
            .map(|j| {
                let matched: Vec<usize> = labeled
                    .iter()
                    .copied()
                    .filter(|&i| dl.weak_labels()[i][j] != 0)
                    .collect();
                // a source that never fires falls back to every labeled row
                if matched.is_empty() {
                    labeled.clone()
                } else {
                    matched
                }
            })
            .collect(),
    };

    // initialization: slot (1, 1) on every labeled weak row, weight 1
    let first = train_on_aggregated(
        dl,
        &config.learner,
        seeds::derive(seed, &[tag::INIT_LEARNER]),
    )?;
    let mut weak_table = ScoreTable::new(labeled.len(), c);
    let mut clean_table = ScoreTable::new(dc.len(), c);
    weak_table.push(contributions(&first, 1, &weak_batch, &weak_gates)?)?;
    clean_table.push(contributions(&first, 1, &clean_batch, &clean_gates)?)?;
    let mut members = vec![Member {
        t: 1,
        l: 1,
        learner: first,
    }];
    let mut weights = WeightVector(vec![1.0]);
    let mut raw_scale = 1.0;
    let mut data_weights = init_data_weights(labeled.len())?;
    let mut clean_weights = init_data_weights(dc.len())?;
    let mut errors = ErrorMatrix::zeros(dc.len());

    let init_eval = evaluate_clean(&clean_table, &weights, &gold, space)?;
    let init = InitRecord {
        clean_acc: init_eval.acc,
        clean_f1: init_eval.f1,
        clean_error: init_eval.error,
        train_size: labeled.len(),
        avg_distance: d,
    };
    let mut current = init_eval;
    let mut rounds = Vec::new();
    let mut converged = false;

    'outer: for t in 1..=config.rounds {
        for l in 1..=p {
            if t == 1 && l == 1 {
                continue;
            }
            errors.update(&current.normalized, &gold, config.localize.increment)?;
            let pool = match config.region_pool {
                RegionPool::AllLabeled => &pools[0],
                RegionPool::SourceMatched => &pools[l - 1],
            };
            let region: LocalRegion = match build_local_region(
                &errors,
                &all_features,
                pool,
                &clean_batch.features,
                &config.localize,
                d.mean,
            )? {
                Some(r) => r,
                None => {
                    converged = true;
                    break 'outer;
                }
            };
            let inputs: Vec<&[f64]> = region.members.iter().map(|&i| dl.features(i)).collect();
            let labels: Vec<Label> = region.members.iter().map(|&i| agg[i]).collect();
            let learner = train_base(
                &inputs,
                &labels,
                space,
                &config.learner,
                seeds::derive(seed, &[tag::LEARNER, t as u64, l as u64]),
            )?
            .learner;

            weak_table.push(contributions(&learner, l, &weak_batch, &weak_gates)?)?;
            clean_table.push(contributions(&learner, l, &clean_batch, &clean_gates)?)?;

            let carried: Vec<f64> = match config.weight_carry {
                WeightCarry::Normalized => weights.0.clone(),
                WeightCarry::RawScale => weights.0.iter().map(|a| a * raw_scale).collect(),
            };

            let (alpha_est, weighted_err, selection) = match (mode, config.integrated) {
                (WeightMode::CleanOnly, IntegratedWeights::Grid) => {
                    let grid = config.integrated_grid;
                    let base = WeightVector(carried).clip_normalized();
                    let candidates: Vec<WeightVector> = (0..=grid)
                        .map(|g| {
                            let s = g as f64 / grid as f64;
                            let mut v: Vec<f64> = base.0.iter().map(|a| a * (1.0 - s)).collect();
                            v.push(s);
                            WeightVector(v)
                        })
                        .collect();
                    (
                        None,
                        None,
                        select_weights(&candidates, &clean_table, &gold)?,
                    )
                }
                _ => {
                    // the estimate comes from the weak set, or from the clean set
                    // in integrated mode
                    let (batch, gates, table, labels, w) = match mode {
                        WeightMode::CleanOnly => (
                            &clean_batch,
                            &clean_gates,
                            &clean_table,
                            gold.as_slice(),
                            &mut clean_weights,
                        ),
                        _ => (
                            &weak_batch,
                            &weak_gates,
                            &weak_table,
                            weak_labels.as_slice(),
                            &mut data_weights,
                        ),
                    };
                    let preds = learner_predictions(&learner, batch)?;
                    let err = match config.alpha_scope {
                        AlphaScope::WeakSet => weighted_error(w, &preds, labels)?,
                        AlphaScope::Gated => {
                            let q: Vec<f64> = gates.iter().map(|g| g[l - 1]).collect();
                            gated_error(w, &q, &preds, labels)?
                        }
                    };
                    let alpha = estimate_alpha(err);
                    let mut raw = carried;
                    raw.push(alpha);
                    let raw = WeightVector(raw);
                    let estimate = raw.clip_normalized();
                    // data weights follow the estimated ensemble (or the new learner alone)
                    let update_preds = if config.classic_update {
                        preds
                    } else {
                        table_predictions(table, estimate.as_slice())
                    };
                    *w = update_data_weights(w, alpha, &update_preds, labels)?;
                    let candidates = match mode {
                        WeightMode::EstimateThenModify => {
                            let clipped = WeightVector(raw.0.iter().map(|a| a.max(0.0)).collect());
                            perturb_weights(
                                &raw,
                                config.perturb.n_p,
                                config.perturb.mu,
                                config.perturb.sigma_for(&clipped),
                                seeds::derive(seed, &[tag::PERTURB, t as u64, l as u64]),
                            )?
                        }
                        _ => vec![estimate],
                    };
                    raw_scale += alpha.max(0.0);
                    (
                        Some(alpha),
                        Some(err),
                        select_weights(&candidates, &clean_table, &gold)?,
                    )
                }
            };

            weights = selection.weights.clone();
            members.push(Member { t, l, learner });
            current = evaluate_clean(&clean_table, &weights, &gold, space)?;
            rounds.push(RoundRecord {
                t,
                l,
                clean_acc: current.acc,
                clean_f1: current.f1,
                region_size: region.members.len(),
                alpha_est,
                alpha_final: *weights.0.last().expect("nonempty"),
                weighted_error: weighted_err,
                candidate_errors: selection.errors,
                selected: selection.index,
                clean_error: current.error,
                anchors: region.anchors,
                radii: region.radii,
                cluster_sizes: region.cluster_sizes,
                fallback: region.fallback,
                weights: weights.0.clone(),
            });
        }
    }

    Ok(RunOutput {
        ensemble: Ensemble {
            version: ENSEMBLE_FORMAT_VERSION,
            label_space: space,
            members,
            weights,
            gate,
        },
        init,
        rounds,
        converged,
    })
}
