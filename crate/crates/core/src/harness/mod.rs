//! Experiment drivers behind the command-line tool: data preparation, single
//! runs that write a self-contained run directory, evaluation of a saved
//! ensemble, and seed sweeps.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{DataSource, Grouping, Profile, RunConfig};

use crate::boost::{
    run_ablation, train_on_aggregated, Batch, Ensemble, InitRecord, RunOutput, Variant,
};
use crate::condfn::{build_source_index, train_cond_fn, CondFn};
use crate::datamodel::{
    aggregate, build_match_matrix, Aggregation, CleanSet, DatasetFile, Instance, Label, LabelSpace,
    WeakLabeledSet,
};
use crate::error::{Error, Result};
use crate::learner::BaseLearner;
use crate::metrics::{compute_metrics, mean_std, MetricsReport};
use crate::seeds::{self, tag};
use crate::weaksource::{
    apply_grouping, apply_grouping_clean, generate_synthetic, group_lfs_by_label, seeded_subset,
    SourceGrouping,
};

pub const METRICS_FILE: &str = "metrics.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const CONFIG_FILE: &str = "config.resolved.json";
pub const COND_FN_FILE: &str = "cond_fn.json";
pub const SWEEP_FILE: &str = "sweep.json";

/// The three splits a run works with, after grouping and aggregation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub weak: WeakLabeledSet,
    pub clean: CleanSet,
    pub test: CleanSet,
}

fn unit_norm_instances(instances: &[Instance]) -> Vec<Instance> {
    instances
        .iter()
        .map(|x| {
            let norm = x.features.iter().map(|v| v * v).sum::<f64>().sqrt();
            let features = if norm > 0.0 {
                x.features.iter().map(|v| v / norm).collect()
            } else {
                x.features.clone()
            };
            Instance {
                features,
                ..x.clone()
            }
        })
        .collect()
}

fn unit_norm_weak(weak: &WeakLabeledSet) -> Result<WeakLabeledSet> {
    WeakLabeledSet::new(
        weak.label_space(),
        unit_norm_instances(weak.instances()),
        weak.weak_labels().to_vec(),
        weak.lf_names().to_vec(),
    )
}

fn unit_norm_clean(set: &CleanSet) -> Result<CleanSet> {
    let out = CleanSet::new(set.label_space(), unit_norm_instances(set.instances()))?;
    match set.lf_rows() {
        Some(rows) => out.with_lf_rows(rows.to_vec()),
        None => Ok(out),
    }
}

fn load_split(path: &Path) -> Result<DatasetFile> {
    DatasetFile::load(path)
}

/// Load or generate the splits, then apply preprocessing, grouping, the
/// clean-subset draw, and weak-label aggregation.
pub fn prepare_data(cfg: &RunConfig) -> Result<Prepared> {
    let (mut weak, mut valid, mut test) = match &cfg.data {
        DataSource::Synthetic { generator } => {
            let d = generate_synthetic(generator, seeds::derive(cfg.seed, &[tag::GENERATOR]))?;
            (d.weak, d.clean, d.test)
        }
        DataSource::Files { train, valid, test } => (
            load_split(train)?.into_weak()?,
            load_split(valid)?.into_clean()?,
            load_split(test)?.into_clean()?,
        ),
    };
    let space = weak.label_space();
    if valid.label_space() != space || test.label_space() != space {
        return Err(Error::validation(
            "splits disagree on the number of classes",
        ));
    }
    if cfg.unit_norm {
        weak = unit_norm_weak(&weak)?;
        valid = unit_norm_clean(&valid)?;
        test = unit_norm_clean(&test)?;
    }
    let grouping = match &cfg.grouping {
        Grouping::None => None,
        Grouping::ByLabel { policy } => Some((group_lfs_by_label(&weak)?, *policy)),
        Grouping::Explicit { group_of, policy } => {
            if group_of.len() != weak.num_sources() {
                return Err(Error::Config(format!(
                    "group_of lists {} LFs, data has {}",
                    group_of.len(),
                    weak.num_sources()
                )));
            }
            Some((SourceGrouping::from_group_of(group_of.clone())?, *policy))
        }
    };
    if let Some((g, policy)) = &grouping {
        weak = apply_grouping(&weak, g, *policy)?;
        valid = apply_grouping_clean(&valid, g, *policy)?;
        test = apply_grouping_clean(&test, g, *policy)?;
    }
    let pick = seeded_subset(
        valid.len(),
        cfg.clean_size,
        seeds::derive(cfg.seed, &[tag::CLEAN_SPLIT]),
    );
    let clean = valid.select(&pick)?;
    let prior = match (&cfg.class_prior, cfg.aggregation) {
        (Some(p), _) => Some(p.clone()),
        (None, Aggregation::WeightedVote) => Some(class_frequencies(&clean)),
        (None, Aggregation::MajorityVote) => None,
    };
    if let Some(p) = &prior {
        if p.len() != space.num_classes() {
            return Err(Error::Config(format!(
                "class_prior has {} entries for {} classes",
                p.len(),
                space.num_classes()
            )));
        }
    }
    let weak = aggregate(weak, cfg.aggregation, prior.as_deref())?;
    Ok(Prepared { weak, clean, test })
}

fn class_frequencies(set: &CleanSet) -> Vec<f64> {
    let c = set.label_space().num_classes();
    let mut counts = vec![0.0; c];
    for y in set.gold_labels() {
        counts[LabelSpace::index(y)] += 1.0;
    }
    let n = set.len() as f64;
    counts.iter().map(|v| v / n).collect()
}

/// Train the gate on the weak set's source-index pairs.
pub fn train_gate(cfg: &RunConfig, weak: &WeakLabeledSet) -> Result<CondFn> {
    let matches = build_match_matrix(weak)?;
    let features: Vec<&[f64]> = (0..weak.len()).map(|i| weak.features(i)).collect();
    let ds = build_source_index(&matches, &features)?;
    if ds.is_empty() {
        return Err(Error::validation(
            "no weak instance is matched by any source",
        ));
    }
    train_cond_fn(&ds, &cfg.cond_fn, seeds::derive(cfg.seed, &[tag::GATE]))
}

/// Single learner on the majority-vote (or configured) aggregated labels.
pub fn train_baseline(cfg: &RunConfig, weak: &WeakLabeledSet) -> Result<BaseLearner> {
    train_on_aggregated(
        weak,
        &cfg.learner,
        seeds::derive(cfg.seed, &[tag::BASELINE]),
    )
}

pub fn score_ensemble(ensemble: &Ensemble, set: &CleanSet) -> Result<MetricsReport> {
    let preds = ensemble.predict_batch(&Batch::from_clean(set))?;
    compute_metrics(&preds, &set.gold_labels(), set.label_space())
}

pub fn score_learner(learner: &BaseLearner, set: &CleanSet) -> Result<MetricsReport> {
    let preds: Vec<Label> = set
        .instances()
        .iter()
        .map(|x| learner.predict_label(&x.features))
        .collect::<Result<_>>()?;
    compute_metrics(&preds, &set.gold_labels(), set.label_space())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub num_classes: usize,
    pub num_sources: usize,
    pub dim: usize,
    pub n_weak: usize,
    pub n_weak_labeled: usize,
    pub n_clean: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: Variant,
    pub seed: u64,
    pub members: usize,
    pub rounds_completed: usize,
    pub converged: bool,
    pub data: DataSummary,
    pub init: InitRecord,
    pub clean_accuracy: f64,
    pub clean_error: f64,
    pub test: MetricsReport,
    /// Single learner trained on the aggregated weak labels.
    pub baseline_test: MetricsReport,
    pub gate_final_loss: Option<f64>,
}

/// Everything a single run produced, in memory.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub output: RunOutput,
    pub report: RunReport,
    pub cond_fn: CondFn,
}

pub fn run(cfg: &RunConfig) -> Result<RunResult> {
    let boost_cfg = cfg.boost_config()?;
    let data = prepare_data(cfg)?;
    let cond_fn = train_gate(cfg, &data.weak)?;
    let output = run_ablation(
        cfg.variant,
        &data.weak,
        &data.clean,
        &cond_fn,
        &boost_cfg,
        cfg.seed,
    )?;
    let test = score_ensemble(&output.ensemble, &data.test)?;
    let baseline_test = score_learner(&train_baseline(cfg, &data.weak)?, &data.test)?;
    let (clean_accuracy, clean_error) = output
        .rounds
        .last()
        .map_or((output.init.clean_acc, output.init.clean_error), |r| {
            (r.clean_acc, r.clean_error)
        });
    let report = RunReport {
        variant: cfg.variant,
        seed: cfg.seed,
        members: output.ensemble.members.len(),
        rounds_completed: output.rounds.len(),
        converged: output.converged,
        data: DataSummary {
            num_classes: data.weak.label_space().num_classes(),
            num_sources: data.weak.num_sources(),
            dim: data.weak.dim(),
            n_weak: data.weak.len(),
            n_weak_labeled: data.weak.labeled_rows().len(),
            n_clean: data.clean.len(),
            n_test: data.test.len(),
        },
        init: output.init.clone(),
        clean_accuracy,
        clean_error,
        test,
        baseline_test,
        gate_final_loss: cond_fn.loss_history.last().copied(),
    };
    Ok(RunResult {
        output,
        report,
        cond_fn,
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Run and write `config.resolved.json`, `metrics.jsonl`, `report.json`,
/// `ensemble.json` and `cond_fn.json` into `out`.
pub fn run_to_dir(cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    create_dir(out)?;
    write_file(&out.join(CONFIG_FILE), &cfg.to_json_pretty()?)?;
    let result = run(cfg)?;
    let mut log = String::new();
    for r in &result.output.rounds {
        log.push_str(&serde_json::to_string(r)?);
        log.push('\n');
    }
    write_file(&out.join(METRICS_FILE), &log)?;
    result.output.ensemble.save(out.join(ENSEMBLE_FILE))?;
    result.cond_fn.save(out.join(COND_FN_FILE))?;
    write_file(
        &out.join(REPORT_FILE),
        &serde_json::to_string_pretty(&result.report)?,
    )?;
    Ok(result.report)
}

/// Score a saved ensemble on a dataset file.
pub fn evaluate_file(ensemble_path: &Path, data_path: &Path) -> Result<MetricsReport> {
    let ensemble = Ensemble::load(ensemble_path)?;
    let set = DatasetFile::load(data_path)?.into_clean()?;
    if set.label_space() != ensemble.label_space {
        return Err(Error::validation(
            "dataset and ensemble disagree on the number of classes",
        ));
    }
    score_ensemble(&ensemble, &set)
}

/// Write the three synthetic splits as dataset files.
pub fn generate_to_dir(cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let DataSource::Synthetic { generator } = &cfg.data else {
        return Err(Error::Config(
            "generate needs a synthetic data source".into(),
        ));
    };
    create_dir(out)?;
    let d = generate_synthetic(generator, seeds::derive(cfg.seed, &[tag::GENERATOR]))?;
    let names = d.weak.lf_names().to_vec();
    let files = [
        ("train.json", DatasetFile::from_weak(&d.weak)),
        ("valid.json", DatasetFile::from_clean(&d.clean, &names)),
        ("test.json", DatasetFile::from_clean(&d.test, &names)),
    ];
    let mut written = Vec::new();
    for (name, file) in files {
        let path = out.join(name);
        file.save(&path)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub completed: Vec<u64>,
    pub failures: Vec<SeedFailure>,
    /// False when any seed failed.
    pub complete: bool,
    pub test_accuracy: MeanStd,
    pub test_macro_f1: MeanStd,
    pub baseline_accuracy: MeanStd,
    pub per_seed_accuracy: Vec<f64>,
}

/// Run every seed (each into `out/seed-<n>`) and summarize. Failing seeds are
/// reported on stderr, recorded, and skipped.
pub fn seed_sweep(cfg: &RunConfig, seeds: &[u64], out: &Path) -> Result<SweepSummary> {
    if seeds.len() < 2 {
        return Err(Error::Config("a sweep needs at least 2 seeds".into()));
    }
    create_dir(out)?;
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for &seed in seeds {
        let run_cfg = RunConfig {
            seed,
            ..cfg.clone()
        };
        match run_to_dir(&run_cfg, &out.join(format!("seed-{seed}"))) {
            Ok(r) => reports.push(r),
            Err(e) => {
                let _ = writeln!(std::io::stderr(), "warning: seed {seed} failed: {e}");
                failures.push(SeedFailure {
                    seed,
                    error: e.to_string(),
                });
            }
        }
    }
    let acc: Vec<f64> = reports.iter().map(|r| r.test.accuracy).collect();
    let f1: Vec<f64> = reports.iter().map(|r| r.test.macro_f1).collect();
    let base: Vec<f64> = reports.iter().map(|r| r.baseline_test.accuracy).collect();
    let summary = SweepSummary {
        variant: cfg.variant,
        seeds: seeds.to_vec(),
        completed: reports.iter().map(|r| r.seed).collect(),
        complete: failures.is_empty(),
        failures,
        test_accuracy: MeanStd::of(&acc),
        test_macro_f1: MeanStd::of(&f1),
        baseline_accuracy: MeanStd::of(&base),
        per_seed_accuracy: acc,
    };
    write_file(
        &out.join(SWEEP_FILE),
        &serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}
