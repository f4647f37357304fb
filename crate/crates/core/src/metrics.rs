//! Classification metrics.

use serde::{Deserialize, Serialize};

use crate::datamodel::{Label, LabelSpace};
use crate::error::{Error, Result};

/// Positive class for binary F1 when C = 2.
pub const BINARY_POSITIVE: Label = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub accuracy: f64,
    /// Mean per-class F1 over classes that occur in the gold labels or the
    /// predictions.
    pub macro_f1: f64,
    /// F1 of class 2 when C = 2, otherwise absent.
    pub binary_f1: Option<f64>,
    /// `confusion[gold - 1][pred - 1]`.
    pub confusion: Vec<Vec<usize>>,
}

fn f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

pub fn compute_metrics(
    preds: &[Label],
    gold: &[Label],
    space: LabelSpace,
) -> Result<MetricsReport> {
    if preds.len() != gold.len() {
        return Err(Error::validation(format!(
            "{} predictions for {} gold labels",
            preds.len(),
            gold.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::validation("cannot score an empty prediction set"));
    }
    let c = space.num_classes();
    if let Some(&bad) = preds.iter().chain(gold).find(|&&y| !space.is_class(y)) {
        return Err(Error::validation(format!("label {bad} outside 1..={c}")));
    }
    let mut confusion = vec![vec![0usize; c]; c];
    for (&p, &g) in preds.iter().zip(gold) {
        confusion[LabelSpace::index(g)][LabelSpace::index(p)] += 1;
    }
    let n = preds.len();
    let trace: usize = (0..c).map(|k| confusion[k][k]).sum();
    let per_class: Vec<(f64, bool)> = (0..c)
        .map(|k| {
            let tp = confusion[k][k];
            let support: usize = confusion[k].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[k]).sum();
            (
                f1(tp, predicted - tp, support - tp),
                support + predicted > 0,
            )
        })
        .collect();
    let present: Vec<f64> = per_class
        .iter()
        .filter(|(_, p)| *p)
        .map(|(f, _)| *f)
        .collect();
    let macro_f1 = present.iter().sum::<f64>() / present.len() as f64;
    let binary_f1 = (c == 2).then(|| per_class[LabelSpace::index(BINARY_POSITIVE)].0);
    Ok(MetricsReport {
        n,
        accuracy: trace as f64 / n as f64,
        macro_f1,
        binary_f1,
        confusion,
    })
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 || values.iter().all(|&v| v == values[0]) {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}
