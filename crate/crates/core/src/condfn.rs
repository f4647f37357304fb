//! The conditional source function: a probability over weak sources given
//! instance features, learned from the LF match matrix.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, MatchMatrix, ABSTAIN};
use crate::error::{Error, Result};
use crate::nn::{Activation, Mlp, Targets, TrainSettings};

/// Feature vectors paired with normalized match rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceIndexSet {
    features: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    num_sources: usize,
}

impl SourceIndexSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }
}

/// Pairs every matched row's features with its match row scaled to sum 1.
/// Unmatched rows carry no source signal and are left out.
pub fn build_source_index(matches: &MatchMatrix, features: &[&[f64]]) -> Result<SourceIndexSet> {
    if matches.rows() != features.len() {
        return Err(Error::validation(format!(
            "match matrix has {} rows for {} feature vectors",
            matches.rows(),
            features.len()
        )));
    }
    let mut out = SourceIndexSet {
        features: Vec::new(),
        targets: Vec::new(),
        num_sources: matches.cols(),
    };
    for (i, x) in features.iter().enumerate() {
        let row = matches.row(i);
        let hits: u32 = row.iter().map(|&b| u32::from(b)).sum();
        if hits == 0 {
            continue;
        }
        out.features.push(x.to_vec());
        out.targets.push(
            row.iter()
                .map(|&b| f64::from(b) / f64::from(hits))
                .collect(),
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondFnConfig {
    pub hidden: [usize; 2],
    #[serde(default)]
    pub activation: Activation,
    pub train: TrainSettings,
}

impl Default for CondFnConfig {
    fn default() -> Self {
        Self {
            hidden: [64, 64],
            activation: Activation::Tanh,
            train: TrainSettings {
                epochs: 60,
                batch_size: 32,
                learning_rate: 0.1,
            },
        }
    }
}

/// Trained gate network plus the metadata needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CondFn {
    pub num_sources: usize,
    pub epochs: usize,
    pub seed: u64,
    pub net: Mlp,
    #[serde(default)]
    pub loss_history: Vec<f64>,
}

impl CondFn {
    /// Untrained network; the zero output layer makes it uniform everywhere.
    pub fn untrained(
        dim: usize,
        num_sources: usize,
        config: &CondFnConfig,
        seed: u64,
    ) -> Result<Self> {
        let net = Mlp::new(
            &[dim, config.hidden[0], config.hidden[1], num_sources],
            config.activation,
            seed,
        )?;
        Ok(Self {
            num_sources,
            epochs: 0,
            seed,
            net,
            loss_history: Vec::new(),
        })
    }

    pub fn q_eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.net.input_dim() {
            return Err(Error::validation(format!(
                "conditional function expects dimension {}, got {}",
                self.net.input_dim(),
                x.len()
            )));
        }
        Ok(self.net.probs(x))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, serde_json::to_string(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let q: CondFn = serde_json::from_str(&text)?;
        q.net.check_shapes()?;
        if q.net.output_dim() != q.num_sources {
            return Err(Error::validation(
                "gate output width differs from source count",
            ));
        }
        Ok(q)
    }
}

pub fn train_cond_fn(ds: &SourceIndexSet, config: &CondFnConfig, seed: u64) -> Result<CondFn> {
    if ds.is_empty() {
        return Err(Error::validation("source-index set is empty"));
    }
    if ds.num_sources == 0 {
        return Err(Error::validation("at least one source is required"));
    }
    let dim = ds.features[0].len();
    let mut q = CondFn::untrained(dim, ds.num_sources, config, seed)?;
    let inputs: Vec<&[f64]> = ds.features.iter().map(Vec::as_slice).collect();
    q.loss_history = q.net.fit(
        &inputs,
        Targets::Soft(&ds.targets),
        &config.train,
        seed.wrapping_add(0x51ed_270b),
    )?;
    q.epochs = config.train.epochs;
    Ok(q)
}

/// Normalized LF-firing vector; an unmatched row falls back to uniform.
pub fn hard_matching_q(lf_row: &[Label]) -> Vec<f64> {
    let hits = lf_row.iter().filter(|&&y| y != ABSTAIN).count();
    if hits == 0 {
        return vec![1.0 / lf_row.len() as f64; lf_row.len()];
    }
    lf_row
        .iter()
        .map(|&y| if y != ABSTAIN { 1.0 / hits as f64 } else { 0.0 })
        .collect()
}

/// How ensemble members are modulated by source relevance at an input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    /// Trained conditional function.
    Learned { cond_fn: CondFn },
    /// Constant uniform vector (conditional function disabled).
    Uniform { num_sources: usize },
    /// Normalized LF matches of the instance being scored.
    HardMatching { num_sources: usize },
}

impl Gate {
    pub fn num_sources(&self) -> usize {
        match self {
            Gate::Learned { cond_fn } => cond_fn.num_sources,
            Gate::Uniform { num_sources } | Gate::HardMatching { num_sources } => *num_sources,
        }
    }

    /// Source probabilities at `x`. The hard-matching gate needs the
    /// instance's LF row.
    pub fn eval(&self, x: &[f64], lf_row: Option<&[Label]>) -> Result<Vec<f64>> {
        match self {
            Gate::Learned { cond_fn } => cond_fn.q_eval(x),
            Gate::Uniform { num_sources } => Ok(vec![1.0 / *num_sources as f64; *num_sources]),
            Gate::HardMatching { num_sources } => {
                let row = lf_row.ok_or_else(|| {
                    Error::validation("hard-matching gate needs LF rows for every scored instance")
                })?;
                if row.len() != *num_sources {
                    return Err(Error::validation(format!(
                        "LF row has {} entries, gate expects {num_sources}",
                        row.len()
                    )));
                }
                Ok(hard_matching_q(row))
            }
        }
    }
}
