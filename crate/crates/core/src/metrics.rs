//! Support-weighted classification metrics shared by the NLU and policy
//! evaluators.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassScore>,
    /// `confusion[gold][predicted]` over `labels`.
    pub confusion: Vec<Vec<usize>>,
    pub labels: Vec<String>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Weighted precision/recall/F1 over index-coded pairs. Classes with zero
/// support contribute nothing to the averages but still appear per class.
/// Returns `None` on empty input.
pub fn classify(labels: &[String], pairs: &[(usize, usize)]) -> Option<Classification> {
    if pairs.is_empty() {
        return None;
    }
    let n = labels.len();
    let mut confusion = vec![vec![0usize; n]; n];
    for &(gold, pred) in pairs {
        confusion[gold][pred] += 1;
    }
    let total = pairs.len();
    let mut per_class = Vec::with_capacity(n);
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for c in 0..n {
        let tp = confusion[c][c];
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        let w = support as f64 / total as f64;
        p += w * precision;
        r += w * recall;
        f += w * f1;
        per_class.push(ClassScore {
            label: labels[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let correct = (0..n).map(|c| confusion[c][c]).sum();
    Some(Classification {
        precision: p,
        recall: r,
        f1: f,
        accuracy: ratio(correct, total),
        per_class,
        confusion,
        labels: labels.to_vec(),
    })
}
