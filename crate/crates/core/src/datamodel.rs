//! Dataset containers, label conventions and match-matrix construction.
//!
//! Labels are `u32` with `0` reserved for abstain and `1..=C` the classes.
//! External files using other conventions (WRENCH uses `-1` for abstain and
//! `0..C` for classes) are translated in [`DatasetFile::into_parts`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Label = u32;

/// The abstain sentinel.
pub const ABSTAIN: Label = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    num_classes: usize,
}

impl LabelSpace {
    pub fn new(num_classes: usize) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::validation(format!(
                "label space needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(Self { num_classes })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// True for a class label `1..=C` (abstain excluded).
    pub fn is_class(&self, label: Label) -> bool {
        label >= 1 && (label as usize) <= self.num_classes
    }

    /// True for a class label or the abstain sentinel.
    pub fn is_weak_label(&self, label: Label) -> bool {
        label == ABSTAIN || self.is_class(label)
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> {
        1..=self.num_classes as Label
    }

    /// Zero-based index of a class label.
    pub fn index(label: Label) -> usize {
        debug_assert!(label >= 1);
        (label - 1) as usize
    }

    pub fn label(index: usize) -> Label {
        index as Label + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub features: Vec<f64>,
    pub clean_label: Option<Label>,
}

impl Instance {
    pub fn new(id: impl Into<String>, features: Vec<f64>, clean_label: Option<Label>) -> Self {
        Self {
            id: id.into(),
            features,
            clean_label,
        }
    }
}

fn check_instances(instances: &[Instance], space: LabelSpace) -> Result<Option<usize>> {
    let dim = instances.first().map(|x| x.features.len());
    for inst in instances {
        if Some(inst.features.len()) != dim {
            return Err(Error::validation(format!(
                "instance {} has dimension {}, expected {}",
                inst.id,
                inst.features.len(),
                dim.unwrap_or(0)
            )));
        }
        if let Some(bad) = inst.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "instance {} has non-finite feature {bad}",
                inst.id
            )));
        }
        if let Some(y) = inst.clean_label {
            if !space.is_class(y) {
                return Err(Error::validation(format!(
                    "instance {} has clean label {y} outside 1..={}",
                    inst.id,
                    space.num_classes()
                )));
            }
        }
    }
    Ok(dim)
}

/// The large weakly labeled set: features plus one weak-label column per source.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakLabeledSet {
    label_space: LabelSpace,
    instances: Vec<Instance>,
    weak_labels: Vec<Vec<Label>>,
    lf_names: Vec<String>,
    aggregated: Option<Vec<Label>>,
}

impl WeakLabeledSet {
    pub fn new(
        label_space: LabelSpace,
        instances: Vec<Instance>,
        weak_labels: Vec<Vec<Label>>,
        lf_names: Vec<String>,
    ) -> Result<Self> {
        check_instances(&instances, label_space)?;
        if weak_labels.len() != instances.len() {
            return Err(Error::validation(format!(
                "weak-label matrix has {} rows for {} instances",
                weak_labels.len(),
                instances.len()
            )));
        }
        let p = lf_names.len();
        if p == 0 {
            return Err(Error::validation(
                "at least one labeling function is required",
            ));
        }
        for (i, row) in weak_labels.iter().enumerate() {
            if row.len() != p {
                return Err(Error::validation(format!(
                    "weak-label row {i} has {} columns, expected {p}",
                    row.len()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&y| !label_space.is_weak_label(y)) {
                return Err(Error::validation(format!(
                    "weak label {bad} in row {i} outside 0..={}",
                    label_space.num_classes()
                )));
            }
        }
        Ok(Self {
            label_space,
            instances,
            weak_labels,
            lf_names,
            aggregated: None,
        })
    }

    /// Attach aggregated labels. An entry may be abstain only on an all-abstain row.
    pub fn with_aggregated(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::validation(format!(
                "{} aggregated labels for {} instances",
                labels.len(),
                self.len()
            )));
        }
        for (i, (&y, row)) in labels.iter().zip(&self.weak_labels).enumerate() {
            if !self.label_space.is_weak_label(y) {
                return Err(Error::validation(format!(
                    "aggregated label {y} out of range"
                )));
            }
            if y == ABSTAIN && row.iter().any(|&v| v != ABSTAIN) {
                return Err(Error::validation(format!(
                    "row {i} is matched but its aggregated label is abstain"
                )));
            }
        }
        self.aggregated = Some(labels);
        Ok(self)
    }

    pub fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Number of weak sources (columns).
    pub fn num_sources(&self) -> usize {
        self.lf_names.len()
    }

    pub fn dim(&self) -> usize {
        self.instances.first().map_or(0, |x| x.features.len())
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.instances[i].features
    }

    pub fn weak_labels(&self) -> &[Vec<Label>] {
        &self.weak_labels
    }

    pub fn lf_names(&self) -> &[String] {
        &self.lf_names
    }

    pub fn aggregated(&self) -> Option<&[Label]> {
        self.aggregated.as_deref()
    }

    /// Rows whose aggregated label is a class, in ascending order.
    pub fn labeled_rows(&self) -> Vec<usize> {
        match &self.aggregated {
            Some(agg) => (0..agg.len()).filter(|&i| agg[i] != ABSTAIN).collect(),
            None => Vec::new(),
        }
    }
}

/// The small gold-labeled set.
///
/// `lf_rows` optionally carries the weak-source outputs for these instances;
/// the hard LF-matching gate needs them at inference time.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanSet {
    label_space: LabelSpace,
    instances: Vec<Instance>,
    lf_rows: Option<Vec<Vec<Label>>>,
}

impl CleanSet {
    pub fn new(label_space: LabelSpace, instances: Vec<Instance>) -> Result<Self> {
        if instances.is_empty() {
            return Err(Error::validation("clean set must be nonempty"));
        }
        check_instances(&instances, label_space)?;
        if let Some(inst) = instances.iter().find(|x| x.clean_label.is_none()) {
            return Err(Error::validation(format!(
                "clean instance {} has no label",
                inst.id
            )));
        }
        Ok(Self {
            label_space,
            instances,
            lf_rows: None,
        })
    }

    pub fn with_lf_rows(mut self, rows: Vec<Vec<Label>>) -> Result<Self> {
        if rows.len() != self.instances.len() {
            return Err(Error::validation(format!(
                "{} LF rows for {} clean instances",
                rows.len(),
                self.instances.len()
            )));
        }
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::validation("ragged LF rows"));
        }
        if rows
            .iter()
            .flatten()
            .any(|&y| !self.label_space.is_weak_label(y))
        {
            return Err(Error::validation("LF row label out of range"));
        }
        self.lf_rows = Some(rows);
        Ok(self)
    }

    pub fn label_space(&self) -> LabelSpace {
        self.label_space
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].features.len()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.instances[i].features
    }

    pub fn gold(&self, i: usize) -> Label {
        self.instances[i]
            .clean_label
            .expect("validated at construction")
    }

    pub fn gold_labels(&self) -> Vec<Label> {
        (0..self.len()).map(|i| self.gold(i)).collect()
    }

    pub fn lf_rows(&self) -> Option<&[Vec<Label>]> {
        self.lf_rows.as_deref()
    }

    /// Subset by index, keeping LF rows aligned.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let instances = idx.iter().map(|&i| self.instances[i].clone()).collect();
        let set = Self::new(self.label_space, instances)?;
        match &self.lf_rows {
            Some(rows) => set.with_lf_rows(idx.iter().map(|&i| rows[i].clone()).collect()),
            None => Ok(set),
        }
    }
}

/// Binary N x p matrix of LF firings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u8>,
}

impl MatchMatrix {
    pub fn from_rows(rows: &[Vec<Label>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::validation(format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            entries.extend(row.iter().map(|&y| u8::from(y != ABSTAIN)));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.entries[i * self.cols + j]
    }
}

pub fn build_match_matrix(weak: &WeakLabeledSet) -> Result<MatchMatrix> {
    let m = MatchMatrix::from_rows(weak.weak_labels())?;
    if m.cols() != weak.num_sources() {
        return Err(Error::validation(
            "match matrix width differs from source count",
        ));
    }
    Ok(m)
}

/// Vote over one row. `prior` scales each class's vote count; labels that
/// received no vote never win. Ties go to the smallest label.
pub(crate) fn vote_row(row: &[Label], num_classes: usize, prior: Option<&[f64]>) -> Label {
    let mut counts = vec![0usize; num_classes];
    for &y in row {
        if y != ABSTAIN {
            counts[LabelSpace::index(y)] += 1;
        }
    }
    let mut best: Option<(usize, f64)> = None;
    for (c, &n) in counts.iter().enumerate() {
        if n == 0 {
            continue;
        }
        let score = n as f64 * prior.map_or(1.0, |p| p[c]);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((c, score));
        }
    }
    best.map_or(ABSTAIN, |(c, _)| LabelSpace::label(c))
}

pub fn majority_vote(weak: &WeakLabeledSet) -> Vec<Label> {
    let c = weak.label_space().num_classes();
    weak.weak_labels()
        .iter()
        .map(|row| vote_row(row, c, None))
        .collect()
}

pub fn weighted_vote(weak: &WeakLabeledSet, class_prior: &[f64]) -> Result<Vec<Label>> {
    let c = weak.label_space().num_classes();
    if class_prior.len() != c {
        return Err(Error::validation(format!(
            "class prior has {} entries, expected {c}",
            class_prior.len()
        )));
    }
    let sum: f64 = class_prior.iter().sum();
    if class_prior.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::validation(format!(
            "class prior is not on the simplex (sum {sum})"
        )));
    }
    Ok(weak
        .weak_labels()
        .iter()
        .map(|row| vote_row(row, c, Some(class_prior)))
        .collect())
}

/// Which voting baseline produces the aggregated training labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    MajorityVote,
    WeightedVote,
}

/// Attach aggregated labels using `agg`. Weighted voting uses the class
/// prior estimated from the clean labels when one is given, else uniform.
pub fn aggregate(
    weak: WeakLabeledSet,
    agg: Aggregation,
    prior: Option<&[f64]>,
) -> Result<WeakLabeledSet> {
    let labels = match agg {
        Aggregation::MajorityVote => majority_vote(&weak),
        Aggregation::WeightedVote => {
            let c = weak.label_space().num_classes();
            let uniform = vec![1.0 / c as f64; c];
            weighted_vote(&weak, prior.unwrap_or(&uniform))?
        }
    };
    weak.with_aggregated(labels)
}

/// Label convention used inside a dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelConvention {
    /// 0 = abstain, classes 1..=C.
    #[default]
    Native,
    /// -1 = abstain, classes 0..C-1.
    Wrench,
}

pub const DATASET_FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    DATASET_FORMAT_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileInstance {
    pub id: String,
    pub features: Vec<f64>,
    pub clean_label: Option<i64>,
}

/// On-disk dataset split.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFile {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(default)]
    pub label_convention: LabelConvention,
    pub label_space: usize,
    pub instances: Vec<FileInstance>,
    pub weak_labels: Vec<Vec<i64>>,
    pub lf_names: Vec<String>,
}

impl DatasetFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: DatasetFile = serde_json::from_str(&text)?;
        if file.version != DATASET_FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported dataset version {}",
                file.version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Snapshot a weak set (native convention).
    pub fn from_weak(weak: &WeakLabeledSet) -> Self {
        Self {
            version: DATASET_FORMAT_VERSION,
            label_convention: LabelConvention::Native,
            label_space: weak.label_space().num_classes(),
            instances: weak.instances().iter().map(to_file_instance).collect(),
            weak_labels: weak
                .weak_labels()
                .iter()
                .map(|r| r.iter().map(|&y| i64::from(y)).collect())
                .collect(),
            lf_names: weak.lf_names().to_vec(),
        }
    }

    /// Snapshot a clean split; LF rows are written when present, otherwise
    /// the weak-label matrix has zero columns.
    pub fn from_clean(clean: &CleanSet, lf_names: &[String]) -> Self {
        let weak_labels = match clean.lf_rows() {
            Some(rows) => rows
                .iter()
                .map(|r| r.iter().map(|&y| i64::from(y)).collect())
                .collect(),
            None => vec![Vec::new(); clean.len()],
        };
        let lf_names = if clean.lf_rows().is_some() {
            lf_names.to_vec()
        } else {
            Vec::new()
        };
        Self {
            version: DATASET_FORMAT_VERSION,
            label_convention: LabelConvention::Native,
            label_space: clean.label_space().num_classes(),
            instances: clean.instances().iter().map(to_file_instance).collect(),
            weak_labels,
            lf_names,
        }
    }

    fn translate(&self, raw: i64) -> Result<Label> {
        let native = match self.label_convention {
            LabelConvention::Native => raw,
            LabelConvention::Wrench => raw + 1,
        };
        if native < 0 || native as usize > self.label_space {
            return Err(Error::validation(format!(
                "label {raw} out of range for {} classes ({:?} convention)",
                self.label_space, self.label_convention
            )));
        }
        Ok(native as Label)
    }

    fn parts(&self) -> Result<(LabelSpace, Vec<Instance>, Vec<Vec<Label>>)> {
        let space = LabelSpace::new(self.label_space)?;
        let mut instances = Vec::with_capacity(self.instances.len());
        for fi in &self.instances {
            let clean_label = match fi.clean_label {
                Some(raw) => {
                    let y = self.translate(raw)?;
                    if y == ABSTAIN {
                        return Err(Error::validation(format!(
                            "instance {} has an abstain clean label",
                            fi.id
                        )));
                    }
                    Some(y)
                }
                None => None,
            };
            instances.push(Instance::new(
                fi.id.clone(),
                fi.features.clone(),
                clean_label,
            ));
        }
        let weak = self
            .weak_labels
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&y| self.translate(y))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((space, instances, weak))
    }

    pub fn into_weak(self) -> Result<WeakLabeledSet> {
        let (space, instances, weak) = self.parts()?;
        WeakLabeledSet::new(space, instances, weak, self.lf_names)
    }

    /// Clean split; instances without a gold label are dropped. LF rows are
    /// attached when the file has weak-label columns.
    pub fn into_clean(self) -> Result<CleanSet> {
        let (space, instances, weak) = self.parts()?;
        if weak.len() != instances.len() {
            return Err(Error::validation(
                "weak-label rows differ from instance count",
            ));
        }
        let keep: Vec<usize> = (0..instances.len())
            .filter(|&i| instances[i].clean_label.is_some())
            .collect();
        let has_rows = !self.lf_names.is_empty();
        let set = CleanSet::new(space, keep.iter().map(|&i| instances[i].clone()).collect())?;
        if has_rows {
            set.with_lf_rows(keep.iter().map(|&i| weak[i].clone()).collect())
        } else {
            Ok(set)
        }
    }
}

fn to_file_instance(x: &Instance) -> FileInstance {
    FileInstance {
        id: x.id.clone(),
        features: x.features.clone(),
        clean_label: x.clean_label.map(i64::from),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn weak_from(c: usize, rows: Vec<Vec<Label>>) -> WeakLabeledSet {
        let p = rows[0].len();
        let instances = (0..rows.len())
            .map(|i| Instance::new(format!("x{i}"), vec![i as f64, 0.0], None))
            .collect();
        let names = (0..p).map(|j| format!("lf{j}")).collect();
        WeakLabeledSet::new(LabelSpace::new(c).unwrap(), instances, rows, names).unwrap()
    }

    #[test]
    fn label_space_rejects_single_class() {
        assert!(LabelSpace::new(1).is_err());
        assert!(LabelSpace::new(2).is_ok());
    }

    #[test]
    fn match_matrix_examples() {
        let w = weak_from(2, vec![vec![2, 0, 1], vec![0, 0, 0]]);
        let m = build_match_matrix(&w).unwrap();
        assert_eq!(m.row(0), &[1, 0, 1]);
        assert_eq!(m.row(1), &[0, 0, 0]);
        let w = weak_from(2, vec![vec![1, 1], vec![0, 2]]);
        let m = build_match_matrix(&w).unwrap();
        assert_eq!(m.row(0), &[1, 1]);
        assert_eq!(m.row(1), &[0, 1]);
        assert_eq!((m.rows(), m.cols()), (2, 2));
    }

    #[test]
    fn ragged_weak_labels_rejected() {
        let instances = vec![
            Instance::new("a", vec![0.0], None),
            Instance::new("b", vec![1.0], None),
        ];
        let err = WeakLabeledSet::new(
            LabelSpace::new(2).unwrap(),
            instances,
            vec![vec![1, 0], vec![1]],
            vec!["a".into(), "b".into()],
        );
        assert!(matches!(err, Err(Error::Validation(_))));
        assert!(MatchMatrix::from_rows(&[vec![1, 0], vec![1]]).is_err());
    }

    #[test]
    fn out_of_range_labels_rejected() {
        let instances = vec![Instance::new("a", vec![0.0], None)];
        let err = WeakLabeledSet::new(
            LabelSpace::new(2).unwrap(),
            instances,
            vec![vec![3]],
            vec!["a".into()],
        );
        assert!(err.is_err());
    }

    #[test]
    fn majority_vote_examples() {
        let w = weak_from(2, vec![vec![1, 1, 2], vec![0, 0, 0], vec![1, 2, 0]]);
        assert_eq!(majority_vote(&w), vec![1, 0, 1]);
    }

    #[test]
    fn weighted_vote_examples() {
        let w = weak_from(2, vec![vec![1, 2]]);
        assert_eq!(weighted_vote(&w, &[0.9, 0.1]).unwrap(), vec![1]);
        let w = weak_from(2, vec![vec![2, 2, 1], vec![0, 0, 0]]);
        assert_eq!(weighted_vote(&w, &[0.5, 0.5]).unwrap(), vec![2, 0]);
        assert_eq!(weighted_vote(&w, &[0.01, 0.99]).unwrap()[1], 0);
    }

    #[test]
    fn weighted_vote_rejects_bad_prior() {
        let w = weak_from(2, vec![vec![1, 2]]);
        assert!(weighted_vote(&w, &[0.5, 0.6]).is_err());
        assert!(weighted_vote(&w, &[1.5, -0.5]).is_err());
        assert!(weighted_vote(&w, &[1.0]).is_err());
    }

    #[test]
    fn aggregated_abstain_only_on_unmatched_rows() {
        let w = weak_from(2, vec![vec![1, 0], vec![0, 0]]);
        assert!(w.clone().with_aggregated(vec![0, 0]).is_err());
        let w = w.with_aggregated(vec![1, 0]).unwrap();
        assert_eq!(w.labeled_rows(), vec![0]);
    }

    #[test]
    fn clean_set_requires_labels() {
        let space = LabelSpace::new(2).unwrap();
        assert!(CleanSet::new(space, vec![]).is_err());
        assert!(CleanSet::new(space, vec![Instance::new("a", vec![0.0], None)]).is_err());
        assert!(CleanSet::new(space, vec![Instance::new("a", vec![0.0], Some(3))]).is_err());
        assert!(CleanSet::new(space, vec![Instance::new("a", vec![0.0], Some(2))]).is_ok());
    }

    #[test]
    fn wrench_convention_translates_at_the_boundary() {
        let json = r#"{
            "label_convention": "wrench",
            "label_space": 2,
            "instances": [
                {"id": "a", "features": [0.0, 1.0], "clean_label": 1},
                {"id": "b", "features": [1.0, 0.0], "clean_label": 0}
            ],
            "weak_labels": [[-1, 1], [0, -1]],
            "lf_names": ["p", "q"]
        }"#;
        let file: DatasetFile = serde_json::from_str(json).unwrap();
        let weak = file.clone().into_weak().unwrap();
        assert_eq!(weak.weak_labels(), &[vec![0, 2], vec![1, 0]]);
        assert_eq!(weak.instances()[0].clean_label, Some(2));
        let clean = file.into_clean().unwrap();
        assert_eq!(clean.gold_labels(), vec![2, 1]);
        assert_eq!(clean.lf_rows().unwrap()[1], vec![1, 0]);
    }

    #[test]
    fn loader_rejects_unknown_fields_and_huge_numbers() {
        let json = r#"{"label_space": 2, "instances": [], "weak_labels": [], "lf_names": ["a"], "extra": 1}"#;
        assert!(serde_json::from_str::<DatasetFile>(json).is_err());
        let json = r#"{"label_space": 2, "instances": [{"id":"a","features":[1e999],"clean_label":null}], "weak_labels": [[0]], "lf_names": ["a"]}"#;
        let parsed = serde_json::from_str::<DatasetFile>(json);
        assert!(parsed.is_err() || parsed.unwrap().into_weak().is_err());
    }

    #[test]
    fn non_finite_features_rejected() {
        let file = DatasetFile {
            version: 1,
            label_convention: LabelConvention::Native,
            label_space: 2,
            instances: vec![FileInstance {
                id: "a".into(),
                features: vec![f64::NAN],
                clean_label: None,
            }],
            weak_labels: vec![vec![0]],
            lf_names: vec!["a".into()],
        };
        assert!(matches!(file.into_weak(), Err(Error::Validation(_))));
    }

    fn small_matrix() -> impl Strategy<Value = (usize, Vec<Vec<Label>>)> {
        (2usize..5, 1usize..6, 1usize..12).prop_flat_map(|(c, p, n)| {
            (
                Just(c),
                proptest::collection::vec(proptest::collection::vec(0..=c as Label, p), n),
            )
        })
    }

    proptest! {
        #[test]
        fn weighted_uniform_equals_majority((c, rows) in small_matrix()) {
            let w = weak_from(c, rows);
            let uniform = vec![1.0 / c as f64; c];
            prop_assert_eq!(weighted_vote(&w, &uniform).unwrap(), majority_vote(&w));
        }

        #[test]
        fn match_matrix_shape_and_idempotence((c, rows) in small_matrix()) {
            let w = weak_from(c, rows.clone());
            let m = build_match_matrix(&w).unwrap();
            prop_assert_eq!((m.rows(), m.cols()), (rows.len(), rows[0].len()));
            let as_labels: Vec<Vec<Label>> =
                (0..m.rows()).map(|i| m.row(i).iter().map(|&b| Label::from(b)).collect()).collect();
            prop_assert_eq!(MatchMatrix::from_rows(&as_labels).unwrap(), m);
        }

        #[test]
        fn majority_is_permutation_invariant(
            (c, rows) in small_matrix(),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            for row in rows {
                let mut counts = vec![0; c + 1];
                for &y in &row { counts[y as usize] += 1; }
                let top = counts[1..].iter().max().copied().unwrap_or(0);
                if top == 0 || counts[1..].iter().filter(|&&n| n == top).count() > 1 {
                    continue;
                }
                let expected = vote_row(&row, c, None);
                let mut shuffled = row.clone();
                shuffled.shuffle(&mut rng);
                prop_assert_eq!(vote_row(&shuffled, c, None), expected);
            }
        }
    }
}
