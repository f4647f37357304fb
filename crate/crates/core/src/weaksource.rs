//! Synthetic weak sources and LF grouping.
//!
//! The generator draws features from a Gaussian mixture whose components are
//! tied to classes, then builds half-space labeling functions over it. Each
//! LF points at one component of its class and fires on
//!
//! * instances of its own class whose projection clears `threshold`, and
//! * instances of other classes whose projection clears `noise_threshold`.
//!
//! Both thresholds are calibrated on the weak split so the LF hits its
//! configured coverage and accuracy `1 - noise_rate`. The misfires land on
//! the other-class instances that look most like the LF's target, which
//! gives spatially structured label noise.

use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::datamodel::{vote_row, CleanSet, Instance, Label, LabelSpace, WeakLabeledSet, ABSTAIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLF {
    pub direction: Vec<f64>,
    /// Projection cut for instances of the emitted class.
    pub threshold: f64,
    /// Projection cut for instances of every other class.
    pub noise_threshold: f64,
    pub emitted_label: Label,
    pub noise_rate: f64,
    pub coverage: f64,
}

impl SyntheticLF {
    pub fn projection(&self, x: &[f64]) -> f64 {
        self.direction.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// LF output for an instance whose true class is `truth`.
    pub fn apply(&self, x: &[f64], truth: Label) -> Label {
        let s = self.projection(x);
        let cut = if truth == self.emitted_label {
            self.threshold
        } else {
            self.noise_threshold
        };
        if s > cut {
            self.emitted_label
        } else {
            ABSTAIN
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Component centers evenly spaced on a circle in the first two
    /// coordinates, classes alternating around it.
    #[default]
    Ring,
    /// Component centers drawn at random inside the signal subspace.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LfSpec {
    pub emitted_label: Label,
    pub noise_rate: f64,
    pub coverage: f64,
    /// Which of the class's components the LF points at.
    #[serde(default)]
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub num_classes: usize,
    pub dim: usize,
    pub clusters_per_class: usize,
    #[serde(default)]
    pub layout: Layout,
    #[serde(default = "default_signal_dims")]
    pub signal_dims: usize,
    pub center_radius: f64,
    pub cluster_std: f64,
    pub noise_std: f64,
    pub n_weak: usize,
    pub n_clean: usize,
    pub n_test: usize,
    pub lfs: Vec<LfSpec>,
}

fn default_signal_dims() -> usize {
    2
}

impl GeneratorConfig {
    /// `count` LFs at one shared noise rate and coverage; labels cycle
    /// through the classes and each class's LFs cycle through its components.
    pub fn uniform_lfs(
        num_classes: usize,
        clusters_per_class: usize,
        count: usize,
        noise_rate: f64,
        coverage: f64,
    ) -> Vec<LfSpec> {
        (0..count)
            .map(|j| LfSpec {
                emitted_label: (j % num_classes) as Label + 1,
                noise_rate,
                coverage,
                component: (j / num_classes) % clusters_per_class.max(1),
            })
            .collect()
    }

    /// The desk-scale benchmark: 4 classes, 16 features, 8 LFs at 75%
    /// accuracy and 25% coverage.
    pub fn benchmark() -> Self {
        Self {
            num_classes: 4,
            dim: 16,
            clusters_per_class: 2,
            layout: Layout::Ring,
            signal_dims: 2,
            center_radius: 4.0,
            cluster_std: 1.0,
            noise_std: 1.0,
            n_weak: 8000,
            n_clean: 500,
            n_test: 2000,
            lfs: Self::uniform_lfs(4, 2, 8, 0.25, 0.25),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::validation(m));
        if self.num_classes < 2 {
            return fail(format!("need at least 2 classes, got {}", self.num_classes));
        }
        if self.dim < 2 {
            return fail(format!("need at least 2 dimensions, got {}", self.dim));
        }
        if self.clusters_per_class == 0 {
            return fail("clusters_per_class must be positive".into());
        }
        if self.signal_dims == 0 || self.signal_dims > self.dim {
            return fail(format!("signal_dims must be in 1..={}", self.dim));
        }
        if self.layout == Layout::Ring && self.signal_dims < 2 {
            return fail("ring layout needs 2 signal dimensions".into());
        }
        for (name, v) in [
            ("center_radius", self.center_radius),
            ("cluster_std", self.cluster_std),
            ("noise_std", self.noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return fail(format!("{name} must be finite and nonnegative"));
            }
        }
        if self.n_weak < 2 || self.n_clean == 0 || self.n_test == 0 {
            return fail("need n_weak >= 2, n_clean >= 1, n_test >= 1".into());
        }
        if self.lfs.is_empty() {
            return fail("at least one LF is required".into());
        }
        for (j, lf) in self.lfs.iter().enumerate() {
            if !(lf.emitted_label >= 1 && lf.emitted_label as usize <= self.num_classes) {
                return fail(format!(
                    "LF {j} emits label {} outside 1..={}",
                    lf.emitted_label, self.num_classes
                ));
            }
            if !(0.0..0.5).contains(&lf.noise_rate) {
                return fail(format!("LF {j} noise_rate must be in [0, 0.5)"));
            }
            if !(lf.coverage > 0.0 && lf.coverage <= 1.0) {
                return fail(format!("LF {j} coverage must be in (0, 1]"));
            }
            if lf.component >= self.clusters_per_class {
                return fail(format!(
                    "LF {j} targets component {} of {}",
                    lf.component, self.clusters_per_class
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub weak: WeakLabeledSet,
    pub clean: CleanSet,
    pub test: CleanSet,
    pub lfs: Vec<SyntheticLF>,
}

fn centers(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let k = cfg.num_classes * cfg.clusters_per_class;
    (0..k)
        .map(|j| {
            let mut c = vec![0.0; cfg.dim];
            match cfg.layout {
                Layout::Ring => {
                    let theta = TAU * j as f64 / k as f64;
                    c[0] = cfg.center_radius * theta.cos();
                    c[1] = cfg.center_radius * theta.sin();
                }
                Layout::Random => {
                    let scale = cfg.center_radius / (cfg.signal_dims as f64).sqrt();
                    for v in c.iter_mut().take(cfg.signal_dims) {
                        *v = scale * rng.sample::<f64, _>(StandardNormal);
                    }
                }
            }
            c
        })
        .collect()
}

/// Component `j` belongs to class `j mod C`.
fn component_of(class_index: usize, nth: usize, num_classes: usize) -> usize {
    nth * num_classes + class_index
}

fn sample_points(
    cfg: &GeneratorConfig,
    centers: &[Vec<f64>],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(Vec<f64>, Label)> {
    (0..n)
        .map(|_| {
            let comp = rng.gen_range(0..centers.len());
            let label = (comp % cfg.num_classes) as Label + 1;
            let x = centers[comp]
                .iter()
                .enumerate()
                .map(|(d, &mu)| {
                    let s = if d < cfg.signal_dims {
                        cfg.cluster_std
                    } else {
                        cfg.noise_std
                    };
                    mu + s * rng.sample::<f64, _>(StandardNormal)
                })
                .collect();
            (x, label)
        })
        .collect()
}

/// Largest cut such that exactly `want` of `scores` lie strictly above it
/// (all of them when `want` exceeds the pool).
fn cut_for_count(mut scores: Vec<f64>, want: usize) -> f64 {
    if want == 0 || scores.is_empty() {
        return f64::INFINITY;
    }
    if want >= scores.len() {
        return f64::NEG_INFINITY;
    }
    scores.sort_by(|a, b| b.total_cmp(a));
    // midpoint between the last kept and first dropped score
    0.5 * (scores[want - 1] + scores[want])
}

fn build_lfs(
    cfg: &GeneratorConfig,
    centers: &[Vec<f64>],
    weak_points: &[(Vec<f64>, Label)],
) -> Vec<SyntheticLF> {
    let n = weak_points.len() as f64;
    cfg.lfs
        .iter()
        .map(|spec| {
            let target = &centers[component_of(
                LabelSpace::index(spec.emitted_label),
                spec.component,
                cfg.num_classes,
            )];
            let norm = target.iter().map(|v| v * v).sum::<f64>().sqrt();
            let direction: Vec<f64> = if norm > 0.0 {
                target.iter().map(|v| v / norm).collect()
            } else {
                let mut e = vec![0.0; cfg.dim];
                e[0] = 1.0;
                e
            };
            let proj = |x: &[f64]| direction.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            let (own, other): (Vec<_>, Vec<_>) = weak_points
                .iter()
                .partition(|(_, y)| *y == spec.emitted_label);
            let want_hits = (spec.coverage * (1.0 - spec.noise_rate) * n).round() as usize;
            let want_miss = (spec.coverage * spec.noise_rate * n).round() as usize;
            let threshold = cut_for_count(own.iter().map(|(x, _)| proj(x)).collect(), want_hits);
            let noise_threshold =
                cut_for_count(other.iter().map(|(x, _)| proj(x)).collect(), want_miss);
            SyntheticLF {
                direction,
                threshold,
                noise_threshold,
                emitted_label: spec.emitted_label,
                noise_rate: spec.noise_rate,
                coverage: spec.coverage,
            }
        })
        .collect()
}

fn lf_rows(lfs: &[SyntheticLF], points: &[(Vec<f64>, Label)]) -> Vec<Vec<Label>> {
    points
        .iter()
        .map(|(x, y)| lfs.iter().map(|lf| lf.apply(x, *y)).collect())
        .collect()
}

fn instances(prefix: &str, points: &[(Vec<f64>, Label)]) -> Vec<Instance> {
    points
        .iter()
        .enumerate()
        .map(|(i, (x, y))| Instance::new(format!("{prefix}-{i}"), x.clone(), Some(*y)))
        .collect()
}

/// Seeded synthetic benchmark. The weak split keeps its true labels in
/// `clean_label` for diagnostics only; training code never reads them.
pub fn generate_synthetic(cfg: &GeneratorConfig, seed: u64) -> Result<SyntheticData> {
    cfg.validate()?;
    let space = LabelSpace::new(cfg.num_classes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = centers(cfg, &mut rng);
    let weak_points = sample_points(cfg, &centers, cfg.n_weak, &mut rng);
    let clean_points = sample_points(cfg, &centers, cfg.n_clean, &mut rng);
    let test_points = sample_points(cfg, &centers, cfg.n_test, &mut rng);
    let lfs = build_lfs(cfg, &centers, &weak_points);
    let names: Vec<String> = (0..lfs.len()).map(|j| format!("lf{j}")).collect();
    let weak = WeakLabeledSet::new(
        space,
        instances("weak", &weak_points),
        lf_rows(&lfs, &weak_points),
        names,
    )?;
    let clean = CleanSet::new(space, instances("clean", &clean_points))?
        .with_lf_rows(lf_rows(&lfs, &clean_points))?;
    let test = CleanSet::new(space, instances("test", &test_points))?
        .with_lf_rows(lf_rows(&lfs, &test_points))?;
    Ok(SyntheticData {
        weak,
        clean,
        test,
        lfs,
    })
}

/// Assignment of LF columns to weak-source groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceGrouping {
    pub group_of: Vec<usize>,
    pub num_groups: usize,
}

impl SourceGrouping {
    /// Explicit mapping, e.g. a hand-made grouping loaded from config.
    pub fn from_group_of(group_of: Vec<usize>) -> Result<Self> {
        let num_groups = group_of.iter().max().map_or(0, |&g| g + 1);
        let mut hit = vec![false; num_groups];
        for &g in &group_of {
            hit[g] = true;
        }
        if let Some(g) = hit.iter().position(|&h| !h) {
            return Err(Error::Grouping(format!("group {g} has no member LF")));
        }
        if group_of.is_empty() {
            return Err(Error::Grouping("empty grouping".into()));
        }
        Ok(Self {
            group_of,
            num_groups,
        })
    }

    pub fn members(&self, group: usize) -> Vec<usize> {
        (0..self.group_of.len())
            .filter(|&j| self.group_of[j] == group)
            .collect()
    }
}

/// One group per distinct emitted label, numbered by ascending label.
pub fn group_lfs_by_label(weak: &WeakLabeledSet) -> Result<SourceGrouping> {
    let p = weak.num_sources();
    let mut emitted: Vec<Option<Label>> = vec![None; p];
    for row in weak.weak_labels() {
        for (j, &y) in row.iter().enumerate() {
            if y == ABSTAIN {
                continue;
            }
            match emitted[j] {
                None => emitted[j] = Some(y),
                Some(prev) if prev != y => {
                    return Err(Error::Grouping(format!(
                        "LF {} emits both {prev} and {y}; supply an explicit grouping",
                        weak.lf_names()[j]
                    )))
                }
                Some(_) => {}
            }
        }
    }
    let labels: Vec<Label> = emitted
        .iter()
        .enumerate()
        .map(|(j, e)| {
            e.ok_or_else(|| {
                Error::Grouping(format!(
                    "LF {} never fires; its label is unknown",
                    weak.lf_names()[j]
                ))
            })
        })
        .collect::<Result<_>>()?;
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let group_of = labels
        .iter()
        .map(|y| distinct.binary_search(y).expect("present"))
        .collect();
    SourceGrouping::from_group_of(group_of)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPolicy {
    /// Majority over the members' non-abstain votes, ties to the smallest label.
    #[default]
    Majority,
    /// The first member (in LF order) that fires.
    FirstMatch,
}

pub fn group_rows(
    rows: &[Vec<Label>],
    g: &SourceGrouping,
    num_classes: usize,
    policy: GroupPolicy,
) -> Result<Vec<Vec<Label>>> {
    let members: Vec<Vec<usize>> = (0..g.num_groups).map(|k| g.members(k)).collect();
    rows.iter()
        .map(|row| {
            if row.len() != g.group_of.len() {
                return Err(Error::validation(format!(
                    "grouping covers {} LFs, row has {}",
                    g.group_of.len(),
                    row.len()
                )));
            }
            Ok(members
                .iter()
                .map(|m| {
                    let votes: Vec<Label> = m.iter().map(|&j| row[j]).collect();
                    match policy {
                        GroupPolicy::Majority => vote_row(&votes, num_classes, None),
                        GroupPolicy::FirstMatch => votes
                            .iter()
                            .copied()
                            .find(|&y| y != ABSTAIN)
                            .unwrap_or(ABSTAIN),
                    }
                })
                .collect())
        })
        .collect()
}

pub fn apply_grouping(
    weak: &WeakLabeledSet,
    g: &SourceGrouping,
    policy: GroupPolicy,
) -> Result<WeakLabeledSet> {
    let c = weak.label_space().num_classes();
    let rows = group_rows(weak.weak_labels(), g, c, policy)?;
    let names = (0..g.num_groups).map(|k| format!("group{k}")).collect();
    WeakLabeledSet::new(weak.label_space(), weak.instances().to_vec(), rows, names)
}

/// Regroup a clean split's LF rows so they line up with a grouped weak set.
pub fn apply_grouping_clean(
    clean: &CleanSet,
    g: &SourceGrouping,
    policy: GroupPolicy,
) -> Result<CleanSet> {
    match clean.lf_rows() {
        Some(rows) => {
            let grouped = group_rows(rows, g, clean.label_space().num_classes(), policy)?;
            CleanSet::new(clean.label_space(), clean.instances().to_vec())?.with_lf_rows(grouped)
        }
        None => Ok(clean.clone()),
    }
}

/// Fraction of instances each LF labels.
pub fn coverage(rows: &[Vec<Label>]) -> Vec<f64> {
    let p = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    (0..p)
        .map(|j| rows.iter().filter(|r| r[j] != ABSTAIN).count() as f64 / n)
        .collect()
}

/// Accuracy of each LF on the instances it labels (NaN if it never fires).
pub fn lf_accuracy(rows: &[Vec<Label>], truth: &[Label]) -> Vec<f64> {
    let p = rows.first().map_or(0, Vec::len);
    (0..p)
        .map(|j| {
            let fired: Vec<(Label, Label)> = rows
                .iter()
                .zip(truth)
                .filter(|(r, _)| r[j] != ABSTAIN)
                .map(|(r, &t)| (r[j], t))
                .collect();
            fired.iter().filter(|(a, b)| a == b).count() as f64 / fired.len() as f64
        })
        .collect()
}

/// Shuffle `0..n` with a seed and keep the first `take`.
pub fn seeded_subset(n: usize, take: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx.truncate(take.min(n));
    idx
}
