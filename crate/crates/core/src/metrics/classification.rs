use serde::{Deserialize, Serialize};

use crate::diffcore::argmax;
use crate::error::{Error, Result};
use crate::weaksup::PosteriorTable;

/// Crisp-argmax accuracy over covered rows only. `None` when no row is
/// covered.
pub fn pseudolabel_accuracy(posteriors: &PosteriorTable, truth: &[usize]) -> Result<Option<f64>> {
    if truth.len() != posteriors.n() {
        return Err(Error::invalid("posterior and truth lengths differ"));
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for (i, &y) in truth.iter().enumerate() {
        if posteriors.covered()[i] {
            total += 1;
            if argmax(posteriors.row(i)) == y {
                hits += 1;
            }
        }
    }
    Ok((total > 0).then(|| hits as f64 / total as f64))
}

pub fn accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid("accuracy needs equal, non-empty inputs"));
    }
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

fn support(truth: &[usize], classes: usize) -> Vec<usize> {
    let mut s = vec![0; classes];
    for &y in truth {
        s[y] += 1;
    }
    s
}

/// One-vs-rest F1 per class, averaged with class-support weights.
pub fn weighted_f1(predictions: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::invalid("weighted_f1 needs equal, non-empty inputs"));
    }
    if truth.iter().chain(predictions).any(|&y| y >= classes) {
        return Err(Error::invalid("label outside class range"));
    }
    let sup = support(truth, classes);
    let mut total = 0.0;
    for k in 0..classes {
        if sup[k] == 0 {
            continue;
        }
        let tp = predictions
            .iter()
            .zip(truth)
            .filter(|&(&p, &t)| p == k && t == k)
            .count() as f64;
        let predicted = predictions.iter().filter(|&&p| p == k).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = tp / sup[k] as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        total += f1 * sup[k] as f64;
    }
    Ok(total / truth.len() as f64)
}

/// Area under the precision-recall step function:
/// `Σ_t (R_t − R_{t−1}) · P_t` over distinct score thresholds, highest first.
pub fn average_precision(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    if n_pos == 0 {
        return Err(Error::invalid(
            "average precision needs at least one positive",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            seen += 1;
            if positive[order[i]] {
                tp += 1;
            }
            i += 1;
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / seen as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Ok(ap)
}

/// One-vs-rest average precision per class over posterior columns,
/// averaged with class-support weights.
pub fn weighted_map(posteriors: &PosteriorTable, truth: &[usize]) -> Result<f64> {
    if truth.len() != posteriors.n() || truth.is_empty() {
        return Err(Error::invalid("weighted_map needs equal, non-empty inputs"));
    }
    let classes = posteriors.classes();
    if truth.iter().any(|&y| y >= classes) {
        return Err(Error::invalid("label outside class range"));
    }
    let sup = support(truth, classes);
    let mut total = 0.0;
    for k in 0..classes {
        if sup[k] == 0 {
            continue;
        }
        let scores: Vec<f64> = (0..truth.len()).map(|i| posteriors.row(i)[k]).collect();
        let pos: Vec<bool> = truth.iter().map(|&y| y == k).collect();
        total += average_precision(&scores, &pos)? * sup[k] as f64;
    }
    Ok(total / truth.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub weighted_map: f64,
    pub ari: f64,
    pub covered_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frechet_distance: Option<f64>,
    pub seed: u64,
    pub model: String,
}

impl EvalReport {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = unit(self.accuracy)
            && unit(self.weighted_f1)
            && unit(self.weighted_map)
            && unit(self.covered_fraction)
            && (-1.0..=1.0).contains(&self.ari)
            && self.frechet_distance.is_none_or(|f| f >= 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvariantViolation(format!(
                "scores out of range: {self:?}"
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::Tensor;

    fn table(rows: &[Vec<f64>], covered: Vec<bool>) -> PosteriorTable {
        PosteriorTable::new(Tensor::from_rows(rows), covered).unwrap()
    }

    #[test]
    fn perfect_scores() {
        let truth = vec![0, 1, 2, 1];
        let rows: Vec<Vec<f64>> = truth
            .iter()
            .map(|&y| (0..3).map(|k| if k == y { 1.0 } else { 0.0 }).collect())
            .collect();
        let t = table(&rows, vec![true; 4]);
        assert_eq!(pseudolabel_accuracy(&t, &truth).unwrap(), Some(1.0));
        assert_eq!(weighted_f1(&truth, &truth, 3).unwrap(), 1.0);
        assert_eq!(weighted_map(&t, &truth).unwrap(), 1.0);
    }

    #[test]
    fn uniform_posteriors_pick_lowest_class() {
        let t = table(&vec![vec![0.25; 4]; 3], vec![true; 3]);
        assert_eq!(pseudolabel_accuracy(&t, &[0, 0, 0]).unwrap(), Some(1.0));
    }

    #[test]
    fn uncovered_rows_are_excluded() {
        let t = table(&[vec![1.0, 0.0], vec![1.0, 0.0]], vec![true, false]);
        assert_eq!(pseudolabel_accuracy(&t, &[0, 1]).unwrap(), Some(1.0));
        let none = table(&[vec![0.5, 0.5]], vec![false]);
        assert_eq!(pseudolabel_accuracy(&none, &[0]).unwrap(), None);
    }

    #[test]
    fn single_class_truth() {
        assert_eq!(weighted_f1(&[2, 2, 2], &[2, 2, 2], 4).unwrap(), 1.0);
    }

    #[test]
    fn average_precision_hand_value() {
        // ranking: + - + - ; precisions at positives: 1, 2/3 → AP = 5/6
        let ap = average_precision(&[0.9, 0.8, 0.7, 0.6], &[true, false, true, false]).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-12);
    }
}
