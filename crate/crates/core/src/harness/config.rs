//! Run configuration: JSON with unknown keys rejected, plus named profiles.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boost::{AlphaScope, BoostConfig, IntegratedWeights, RegionPool, Variant, WeightCarry};
use crate::condfn::CondFnConfig;
use crate::datamodel::Aggregation;
use crate::error::{Error, Result};
use crate::learner::LearnerConfig;
use crate::localize::{
    ErrorIncrement, LocalizeConfig, DEFAULT_EXACT_THRESHOLD, DEFAULT_MIN_CLUSTER,
};
use crate::weaksource::{GeneratorConfig, GroupPolicy};
use crate::weighting::PerturbConfig;

/// Per-dataset defaults for the anchor count `k` and radius scale `c1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Imdb,
    Yelp,
    Youtube,
    Agnews,
    Trec,
    Cdr,
    Semeval,
    Synthetic,
}

impl Profile {
    pub const ALL: [Profile; 8] = [
        Profile::Imdb,
        Profile::Yelp,
        Profile::Youtube,
        Profile::Agnews,
        Profile::Trec,
        Profile::Cdr,
        Profile::Semeval,
        Profile::Synthetic,
    ];

    /// `(k, c1)`.
    pub fn localize(self) -> (usize, f64) {
        match self {
            Profile::Imdb | Profile::Yelp | Profile::Agnews => (10, 4.0),
            Profile::Youtube => (5, 8.0),
            Profile::Trec | Profile::Cdr | Profile::Semeval => (5, 10.0),
            Profile::Synthetic => (5, 4.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Imdb => "imdb",
            Profile::Yelp => "yelp",
            Profile::Youtube => "youtube",
            Profile::Agnews => "agnews",
            Profile::Trec => "trec",
            Profile::Cdr => "cdr",
            Profile::Semeval => "semeval",
            Profile::Synthetic => "synthetic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown profile {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Generated on the fly from the run seed.
    Synthetic {
        #[serde(default = "GeneratorConfig::benchmark")]
        generator: GeneratorConfig,
    },
    /// Dataset files; relative paths resolve against the config file.
    Files {
        train: PathBuf,
        valid: PathBuf,
        test: PathBuf,
    },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            generator: GeneratorConfig::benchmark(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Grouping {
    /// One weak source per LF.
    #[default]
    None,
    /// One source per emitted label.
    ByLabel {
        #[serde(default)]
        policy: GroupPolicy,
    },
    /// Hand-made mapping from LF index to group index.
    Explicit {
        group_of: Vec<usize>,
        #[serde(default)]
        policy: GroupPolicy,
    },
}

fn d_clean_size() -> usize {
    500
}
fn d_rounds() -> usize {
    5
}
fn d_n_min() -> usize {
    DEFAULT_MIN_CLUSTER
}
fn d_exact() -> usize {
    DEFAULT_EXACT_THRESHOLD
}
fn d_grid() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub data: DataSource,
    #[serde(default)]
    pub profile: Option<Profile>,
    /// Size of the clean subset drawn from the validation split.
    #[serde(default = "d_clean_size")]
    pub clean_size: usize,
    #[serde(default)]
    pub aggregation: Aggregation,
    /// Class prior for weighted voting; defaults to the clean-set frequencies.
    #[serde(default)]
    pub class_prior: Option<Vec<f64>>,
    #[serde(default)]
    pub grouping: Grouping,
    /// Scale every feature vector to unit length before anything else.
    #[serde(default)]
    pub unit_norm: bool,
    #[serde(default = "d_rounds")]
    pub rounds: usize,
    /// Anchor count; falls back to the profile, then 5.
    #[serde(default)]
    pub k: Option<usize>,
    /// Radius scale; falls back to the profile, then 4.0.
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default = "d_n_min")]
    pub n_min: usize,
    #[serde(default = "d_exact")]
    pub exact_threshold: usize,
    #[serde(default)]
    pub increment: ErrorIncrement,
    #[serde(default)]
    pub perturb: PerturbConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub cond_fn: CondFnConfig,
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
    #[serde(default = "d_grid")]
    pub integrated_grid: usize,
    #[serde(default)]
    pub variant: Variant,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl RunConfig {
    /// Parse and check a config file. Relative dataset paths are rewritten
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let DataSource::Files { train, valid, test } = &mut cfg.data {
            let base = path.parent().unwrap_or_else(|| Path::new("."));
            for p in [train, valid, test] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Fill `k` and `c1` from the profile (explicit values win) and check
    /// every range.
    pub fn resolve(mut self) -> Result<Self> {
        let (pk, pc1) = self.profile.unwrap_or(Profile::Synthetic).localize();
        self.k.get_or_insert(pk);
        self.c1.get_or_insert(pc1);
        self.boost_config()?;
        if self.clean_size == 0 {
            return Err(Error::Config("clean_size must be positive".into()));
        }
        if let Some(prior) = &self.class_prior {
            if prior.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::Config(
                    "class_prior entries must be nonnegative".into(),
                ));
            }
        }
        if let DataSource::Synthetic { generator } = &self.data {
            generator.validate().map_err(config_error)?;
        }
        if self.cond_fn.hidden.contains(&0) {
            return Err(Error::Config(
                "cond_fn hidden widths must be positive".into(),
            ));
        }
        self.cond_fn.train.validate().map_err(config_error)?;
        Ok(self)
    }

    pub fn boost_config(&self) -> Result<BoostConfig> {
        let cfg = BoostConfig {
            rounds: self.rounds,
            localize: LocalizeConfig {
                k: self.k.unwrap_or(Profile::Synthetic.localize().0),
                c1: self.c1.unwrap_or(Profile::Synthetic.localize().1),
                n_min: self.n_min,
                exact_threshold: self.exact_threshold,
                increment: self.increment,
            },
            perturb: self.perturb,
            learner: self.learner,
            classic_update: self.classic_update,
            weight_carry: self.weight_carry,
            region_pool: self.region_pool,
            alpha_scope: self.alpha_scope,
            integrated: self.integrated,
            integrated_grid: self.integrated_grid,
        };
        cfg.validate().map_err(config_error)?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Config(m),
        other => other,
    }
}
