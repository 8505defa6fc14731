use serde::{Deserialize, Serialize};

use crate::diffcore::{argmax, Tensor};
use crate::error::{Error, Result};

/// Vote matrix of `m` labeling functions over `n` samples.
///
/// Entries are `0` (abstain) or `1..=C`, where vote `k` names the
/// zero-based class `k - 1`. Storage is row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    n: usize,
    m: usize,
    classes: usize,
    votes: Vec<u8>,
}

impl LabelMatrix {
    pub fn new(n: usize, m: usize, classes: usize, votes: Vec<u8>) -> Result<Self> {
        if classes < 2 || classes > u8::MAX as usize {
            return Err(Error::invalid(format!(
                "class count {classes} out of range"
            )));
        }
        if votes.len() != n * m {
            return Err(Error::ShapeMismatch {
                op: "LabelMatrix::new",
                lhs: vec![n, m],
                rhs: vec![votes.len()],
            });
        }
        if let Some(bad) = votes.iter().find(|&&v| v as usize > classes) {
            return Err(Error::invalid(format!(
                "vote {bad} exceeds class count {classes}"
            )));
        }
        Ok(Self {
            n,
            m,
            classes,
            votes,
        })
    }

    pub fn from_rows(rows: &[Vec<u8>], classes: usize) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("ragged label matrix rows"));
        }
        Self::new(rows.len(), m, classes, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn votes(&self) -> &[u8] {
        &self.votes
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.votes[i * self.m..(i + 1) * self.m]
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.votes[i * self.m + j]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = u8> + '_ {
        (0..self.n).map(move |i| self.get(i, j))
    }

    pub fn is_covered(&self, i: usize) -> bool {
        self.row(i).iter().any(|&v| v != 0)
    }

    /// True when some column takes at least two distinct values.
    pub fn has_informative_column(&self) -> bool {
        (0..self.m).any(|j| {
            let mut col = self.column(j);
            match col.next() {
                Some(first) => col.any(|v| v != first),
                None => false,
            }
        })
    }

    pub fn select_rows(&self, idx: &[usize]) -> LabelMatrix {
        let mut votes = Vec::with_capacity(idx.len() * self.m);
        for &i in idx {
            votes.extend_from_slice(self.row(i));
        }
        LabelMatrix {
            n: idx.len(),
            m: self.m,
            classes: self.classes,
            votes,
        }
    }

    /// Appends columns of another matrix over the same samples.
    pub fn hstack(&self, other: &LabelMatrix) -> Result<LabelMatrix> {
        if self.n != other.n || self.classes != other.classes {
            return Err(Error::invalid("hstack needs equal row and class counts"));
        }
        let m = self.m + other.m;
        let mut votes = Vec::with_capacity(self.n * m);
        for i in 0..self.n {
            votes.extend_from_slice(self.row(i));
            votes.extend_from_slice(other.row(i));
        }
        Ok(LabelMatrix {
            n: self.n,
            m,
            classes: self.classes,
            votes,
        })
    }
}

/// Row-stochastic `n × C` matrix of pseudolabel probabilities, together
/// with which rows had at least one vote.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorTable {
    probs: Tensor,
    covered: Vec<bool>,
}

impl PosteriorTable {
    pub fn new(probs: Tensor, covered: Vec<bool>) -> Result<Self> {
        if probs.rows() != covered.len() {
            return Err(Error::invalid(
                "posterior rows and coverage mask differ in length",
            ));
        }
        for r in 0..probs.rows() {
            let row = probs.row_slice(r);
            let s: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (s - 1.0).abs() > 1e-10 {
                return Err(Error::InvariantViolation(format!(
                    "posterior row {r} is not a distribution"
                )));
            }
        }
        Ok(Self { probs, covered })
    }

    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn covered(&self) -> &[bool] {
        &self.covered
    }

    pub fn n(&self) -> usize {
        self.covered.len()
    }

    pub fn classes(&self) -> usize {
        self.probs.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.probs.row_slice(i)
    }

    /// Crisp labels; ties go to the lowest class index.
    pub fn crisp(&self) -> Vec<usize> {
        (0..self.n()).map(|i| argmax(self.row(i))).collect()
    }
}

/// Indices of rows with at least one non-abstaining vote.
pub fn coverage_filter(l: &LabelMatrix) -> Vec<usize> {
    (0..l.n()).filter(|&i| l.is_covered(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_of_range_votes_rejected() {
        assert!(LabelMatrix::new(1, 2, 2, vec![1, 3]).is_err());
        assert!(LabelMatrix::new(1, 2, 1, vec![1, 1]).is_err());
        assert!(LabelMatrix::new(1, 2, 2, vec![1]).is_err());
    }

    #[test]
    fn coverage_filter_edges() {
        let none = LabelMatrix::new(3, 2, 2, vec![0; 6]).unwrap();
        assert!(coverage_filter(&none).is_empty());
        let full = LabelMatrix::new(3, 2, 2, vec![1, 2, 2, 1, 1, 1]).unwrap();
        assert_eq!(coverage_filter(&full), vec![0, 1, 2]);
    }

    #[test]
    fn coverage_filter_even_rows_abstain() {
        // direct enumeration oracle
        let n = 11;
        let rows: Vec<Vec<u8>> = (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    vec![0, 0, 0]
                } else {
                    vec![0, (i % 3) as u8 + 1, 0]
                }
            })
            .collect();
        let l = LabelMatrix::from_rows(&rows, 3).unwrap();
        let odd: Vec<usize> = (0..n).filter(|i| i % 2 == 1).collect();
        assert_eq!(coverage_filter(&l), odd);
    }

    #[test]
    fn informative_column() {
        let l = LabelMatrix::new(2, 2, 2, vec![1, 0, 1, 0]).unwrap();
        assert!(!l.has_informative_column());
        let l = LabelMatrix::new(2, 2, 2, vec![1, 0, 1, 2]).unwrap();
        assert!(l.has_informative_column());
    }

    #[test]
    fn posterior_table_validates_rows() {
        let bad = Tensor::from_rows(&[vec![0.7, 0.2]]);
        assert!(PosteriorTable::new(bad, vec![true]).is_err());
    }
}
