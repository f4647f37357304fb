//! Two-point, two-source instance on which no convex combination of two
//! constant learners reaches loss below 1/2, while an indicator gate reaches 0.
//!
//! Labels use the 2-class convention: `+1` is label 2 and `-1` is label 1.
//! A prediction counts as a loss when its margin (gold score minus other
//! score) is `<= 0`, so an exact tie is an error.

use serde::{Deserialize, Serialize};

pub const GRID_POINTS: usize = 101;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prop1Report {
    pub alphas: Vec<f64>,
    /// Mean 0-1 loss of `alpha * f1 + (1 - alpha) * f2` at each grid point.
    pub convex_losses: Vec<f64>,
    pub min_convex_loss: f64,
    /// Mean 0-1 loss of the indicator-gated ensemble at each grid point.
    pub gated_losses: Vec<f64>,
    /// Worst gated loss over grid points with `0 < alpha < 1`.
    pub gated_loss: f64,
}

/// Scores as `[class 1, class 2]`.
const F1: [f64; 2] = [0.0, 1.0];
const F2: [f64; 2] = [1.0, 0.0];

struct Point {
    gold: usize,
    /// Indicator gate: which source matched this point.
    gate: [f64; 2],
}

const POINTS: [Point; 2] = [
    // LF 1 fires on x1 with +1
    Point {
        gold: 1,
        gate: [1.0, 0.0],
    },
    // LF 2 fires on x2 with -1
    Point {
        gold: 0,
        gate: [0.0, 1.0],
    },
];

fn zero_one(scores: [f64; 2], gold: usize) -> f64 {
    if scores[gold] - scores[1 - gold] <= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn mean_loss(alpha: f64, gated: bool) -> f64 {
    let total: f64 = POINTS
        .iter()
        .map(|pt| {
            let (q1, q2) = if gated {
                (pt.gate[0], pt.gate[1])
            } else {
                (1.0, 1.0)
            };
            let a1 = alpha * q1;
            let a2 = (1.0 - alpha) * q2;
            let s = [a1 * F1[0] + a2 * F2[0], a1 * F1[1] + a2 * F2[1]];
            zero_one(s, pt.gold)
        })
        .sum();
    total / POINTS.len() as f64
}

pub fn prop1_counterexample() -> Prop1Report {
    let alphas: Vec<f64> = (0..GRID_POINTS)
        .map(|i| i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let convex_losses: Vec<f64> = alphas.iter().map(|&a| mean_loss(a, false)).collect();
    let gated_losses: Vec<f64> = alphas.iter().map(|&a| mean_loss(a, true)).collect();
    let min_convex_loss = convex_losses.iter().copied().fold(f64::INFINITY, f64::min);
    let gated_loss = alphas
        .iter()
        .zip(&gated_losses)
        .filter(|(&a, _)| a > 0.0 && a < 1.0)
        .map(|(_, &l)| l)
        .fold(0.0, f64::max);
    Prop1Report {
        alphas,
        convex_losses,
        min_convex_loss,
        gated_losses,
        gated_loss,
    }
}
