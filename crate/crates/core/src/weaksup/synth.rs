use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::LabelMatrix;
use crate::error::{Error, Result};

/// Target behaviour of one unipolar synthetic labeling function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfSpec {
    /// Zero-based class this LF votes for.
    pub target_class: usize,
    /// Fraction of its votes that are correct.
    pub target_accuracy: f64,
    /// Fraction of samples it votes on.
    pub target_propensity: f64,
    pub seed: u64,
}

impl LfSpec {
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.target_class >= classes {
            return Err(Error::invalid(format!(
                "target class {} outside 0..{classes}",
                self.target_class
            )));
        }
        if !(self.target_accuracy > 1.0 / classes as f64 && self.target_accuracy <= 1.0) {
            return Err(Error::invalid(format!(
                "accuracy {} must lie in (1/C, 1]",
                self.target_accuracy
            )));
        }
        if !(self.target_propensity > 0.0 && self.target_propensity <= 1.0) {
            return Err(Error::invalid(format!(
                "propensity {} must lie in (0, 1]",
                self.target_propensity
            )));
        }
        Ok(())
    }

    /// Number of votes, and how many of them are correct, on `n` samples.
    pub fn vote_counts(&self, n: usize) -> (usize, usize) {
        let votes = (self.target_propensity * n as f64).round() as usize;
        let hits = (self.target_accuracy * votes as f64).round() as usize;
        (votes, hits)
    }
}

/// Generates one column per spec. Each LF votes only for its target class:
/// it picks exactly `round(acc · votes)` true positives among samples of
/// that class and the remaining false positives among the others, so the
/// realized accuracy and propensity match the targets up to rounding.
pub fn generate_synthetic_lfs(
    true_labels: &[usize],
    classes: usize,
    specs: &[LfSpec],
) -> Result<LabelMatrix> {
    let n = true_labels.len();
    if let Some(&bad) = true_labels.iter().find(|&&y| y >= classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{classes}")));
    }
    let mut columns = Vec::with_capacity(specs.len());
    for (j, spec) in specs.iter().enumerate() {
        spec.validate(classes)?;
        let positives: Vec<usize> = (0..n)
            .filter(|&i| true_labels[i] == spec.target_class)
            .collect();
        let negatives: Vec<usize> = (0..n)
            .filter(|&i| true_labels[i] != spec.target_class)
            .collect();
        if positives.is_empty() {
            return Err(Error::invalid(format!(
                "LF {j}: target class {} has no samples",
                spec.target_class
            )));
        }
        let (votes, hits) = spec.vote_counts(n);
        let misses = votes - hits;
        if hits > positives.len() || misses > negatives.len() {
            return Err(Error::Infeasible(format!(
                "LF {j}: needs {hits} true positives of {} available and {misses} false positives of {} available",
                positives.len(),
                negatives.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut col = vec![0u8; n];
        let vote = spec.target_class as u8 + 1;
        for k in sample(&mut rng, positives.len(), hits) {
            col[positives[k]] = vote;
        }
        for k in sample(&mut rng, negatives.len(), misses) {
            col[negatives[k]] = vote;
        }
        columns.push(col);
    }
    let m = specs.len();
    let mut votes = vec![0u8; n * m];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            votes[i * m + j] = v;
        }
    }
    LabelMatrix::new(n, m, classes, votes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfStat {
    /// `None` when the LF never votes.
    pub accuracy: Option<f64>,
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfStats {
    pub per_lf: Vec<LfStat>,
    pub mean_accuracy: Option<f64>,
    pub min_accuracy: Option<f64>,
    pub max_accuracy: Option<f64>,
    pub mean_coverage: f64,
}

/// Accuracy over non-abstaining votes and coverage for every LF.
pub fn lf_stats(l: &LabelMatrix, true_labels: &[usize]) -> Result<LfStats> {
    if true_labels.len() != l.n() {
        return Err(Error::ShapeMismatch {
            op: "lf_stats",
            lhs: vec![l.n(), l.m()],
            rhs: vec![true_labels.len()],
        });
    }
    let per_lf: Vec<LfStat> = (0..l.m())
        .map(|j| {
            let (mut votes, mut hits) = (0usize, 0usize);
            for (v, &y) in l.column(j).zip(true_labels) {
                if v != 0 {
                    votes += 1;
                    if v as usize == y + 1 {
                        hits += 1;
                    }
                }
            }
            LfStat {
                accuracy: (votes > 0).then(|| hits as f64 / votes as f64),
                coverage: if l.n() == 0 {
                    0.0
                } else {
                    votes as f64 / l.n() as f64
                },
            }
        })
        .collect();
    let accs: Vec<f64> = per_lf.iter().filter_map(|s| s.accuracy).collect();
    let mean_accuracy = (!accs.is_empty()).then(|| accs.iter().sum::<f64>() / accs.len() as f64);
    let min_accuracy = accs.iter().cloned().reduce(f64::min);
    let max_accuracy = accs.iter().cloned().reduce(f64::max);
    let mean_coverage = if per_lf.is_empty() {
        0.0
    } else {
        per_lf.iter().map(|s| s.coverage).sum::<f64>() / per_lf.len() as f64
    };
    Ok(LfStats {
        per_lf,
        mean_accuracy,
        min_accuracy,
        max_accuracy,
        mean_coverage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn balanced(n: usize, c: usize) -> Vec<usize> {
        (0..n).map(|i| i % c).collect()
    }

    #[test]
    fn perfect_full_coverage_lf() {
        let labels = vec![1; 50];
        let spec = LfSpec {
            target_class: 1,
            target_accuracy: 1.0,
            target_propensity: 1.0,
            seed: 3,
        };
        let l = generate_synthetic_lfs(&labels, 3, &[spec]).unwrap();
        assert!(l.column(0).all(|v| v == 2));
    }

    #[test]
    fn realized_rates_match_targets() {
        let labels = balanced(10_000, 4);
        let spec = LfSpec {
            target_class: 2,
            target_accuracy: 0.8,
            target_propensity: 0.2,
            seed: 11,
        };
        let l = generate_synthetic_lfs(&labels, 4, &[spec]).unwrap();
        // count hits over the generated column directly
        let voted: Vec<usize> = (0..l.n()).filter(|&i| l.get(i, 0) != 0).collect();
        let hits = voted.iter().filter(|&&i| labels[i] == 2).count();
        let acc = hits as f64 / voted.len() as f64;
        let cov = voted.len() as f64 / l.n() as f64;
        assert!((0.78..=0.82).contains(&acc), "{acc}");
        assert!((0.18..=0.22).contains(&cov), "{cov}");
        assert!(l.column(0).all(|v| v == 0 || v == 3), "unipolar");
    }

    #[test]
    fn infeasible_spec_is_reported() {
        let labels = balanced(1000, 4);
        let spec = LfSpec {
            target_class: 0,
            target_accuracy: 0.95,
            target_propensity: 0.5,
            seed: 0,
        };
        assert!(matches!(
            generate_synthetic_lfs(&labels, 4, &[spec]),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn generation_is_deterministic() {
        let labels = balanced(500, 3);
        let specs: Vec<LfSpec> = (0..4)
            .map(|j| LfSpec {
                target_class: j % 3,
                target_accuracy: 0.7,
                target_propensity: 0.2,
                seed: 100 + j as u64,
            })
            .collect();
        assert_eq!(
            generate_synthetic_lfs(&labels, 3, &specs).unwrap(),
            generate_synthetic_lfs(&labels, 3, &specs).unwrap()
        );
    }

    #[test]
    fn stats_edge_cases() {
        let labels = vec![0, 1, 0, 1];
        let l =
            LabelMatrix::from_rows(&[vec![0, 1], vec![0, 2], vec![0, 1], vec![0, 2]], 2).unwrap();
        let s = lf_stats(&l, &labels).unwrap();
        assert_eq!(s.per_lf[0].accuracy, None);
        assert_eq!(s.per_lf[0].coverage, 0.0);
        assert_eq!(s.per_lf[1].accuracy, Some(1.0));
        assert_eq!(s.per_lf[1].coverage, 1.0);
        assert_eq!(s.mean_accuracy, Some(1.0));
    }

    #[test]
    fn random_guess_accuracy_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..4)).collect();
        let votes: Vec<u8> = (0..10_000).map(|_| rng.random_range(1..=4u8)).collect();
        let l = LabelMatrix::new(10_000, 1, 4, votes).unwrap();
        let acc = lf_stats(&l, &labels).unwrap().per_lf[0].accuracy.unwrap();
        assert!((acc - 0.25).abs() <= 0.02, "{acc}");
    }
}
