use crate::diffcore::Tensor;
use crate::error::{Error, Result};

use super::matrix::{LabelMatrix, PosteriorTable};

/// Splits each row's mass evenly over its most-voted classes. Rows without
/// any vote get the uniform distribution and are marked uncovered.
pub fn majority_vote(l: &LabelMatrix) -> PosteriorTable {
    let c = l.classes();
    let mut probs = Vec::with_capacity(l.n() * c);
    let mut covered = Vec::with_capacity(l.n());
    let mut counts = vec![0usize; c];
    for i in 0..l.n() {
        counts.iter_mut().for_each(|x| *x = 0);
        for &v in l.row(i) {
            if v != 0 {
                counts[v as usize - 1] += 1;
            }
        }
        let top = *counts.iter().max().unwrap_or(&0);
        covered.push(top > 0);
        if top == 0 {
            probs.extend(std::iter::repeat_n(1.0 / c as f64, c));
        } else {
            let winners = counts.iter().filter(|&&k| k == top).count() as f64;
            probs.extend(
                counts
                    .iter()
                    .map(|&k| if k == top { 1.0 / winners } else { 0.0 }),
            );
        }
    }
    PosteriorTable::new(Tensor::matrix(l.n(), c, probs), covered)
        .expect("majority vote rows are distributions")
}

/// Softmax over per-class sums of LF weights: `score_k = Σ_j w_j 1{λ_j = k}`.
pub fn weighted_softmax_posterior(
    row_votes: &[u8],
    weights: &[f64],
    classes: usize,
) -> Result<Vec<f64>> {
    if row_votes.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            op: "weighted_softmax_posterior",
            lhs: vec![row_votes.len()],
            rhs: vec![weights.len()],
        });
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("label model weights".into()));
    }
    let mut scores = vec![0.0; classes];
    for (&v, &w) in row_votes.iter().zip(weights) {
        if v == 0 {
            continue;
        }
        let k = v as usize;
        if k > classes {
            return Err(Error::invalid(format!(
                "vote {k} exceeds class count {classes}"
            )));
        }
        scores[k - 1] += w;
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        z += *s;
    }
    scores.iter_mut().for_each(|s| *s /= z);
    Ok(scores)
}

/// Label-model weights: one shared vector, or one vector per sample.
#[derive(Clone, Copy, Debug)]
pub enum LfWeights<'a> {
    Shared(&'a [f64]),
    PerSample(&'a Tensor),
}

/// [`weighted_softmax_posterior`] applied to every row of `l`.
pub fn weighted_softmax_table(l: &LabelMatrix, weights: LfWeights<'_>) -> Result<PosteriorTable> {
    let c = l.classes();
    let mut probs = Vec::with_capacity(l.n() * c);
    for i in 0..l.n() {
        let w = match weights {
            LfWeights::Shared(w) => w,
            LfWeights::PerSample(t) => {
                if t.rows() != l.n() {
                    return Err(Error::invalid("per-sample weights need one row per sample"));
                }
                t.row_slice(i)
            }
        };
        probs.extend(weighted_softmax_posterior(l.row(i), w, c)?);
    }
    let covered = (0..l.n()).map(|i| l.is_covered(i)).collect();
    PosteriorTable::new(Tensor::matrix(l.n(), c, probs), covered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::argmax;
    use proptest::prelude::*;

    #[test]
    fn majority_vote_examples() {
        let l = LabelMatrix::from_rows(&[vec![1, 1, 2, 0], vec![1, 2, 0, 0]], 2).unwrap();
        let mv = majority_vote(&l);
        assert_eq!(mv.row(0), &[1.0, 0.0]);
        assert_eq!(mv.row(1), &[0.5, 0.5]);
        assert_eq!(mv.crisp(), vec![0, 0]);
        assert_eq!(mv.covered(), &[true, true]);

        let none = LabelMatrix::new(3, 2, 3, vec![0; 6]).unwrap();
        let mv = majority_vote(&none);
        assert!(mv.covered().iter().all(|c| !c));
        for i in 0..3 {
            assert!(mv.row(i).iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn weighted_softmax_examples() {
        let p = weighted_softmax_posterior(&[1, 1, 2], &[1.0, 1.0, 1.0], 2).unwrap();
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.7311).abs() < 1e-4 && (p[1] - 0.2689).abs() < 1e-4);

        let p = weighted_softmax_posterior(&[1, 3, 2], &[0.0; 3], 3).unwrap();
        assert!(p.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-15));

        let base = weighted_softmax_posterior(&[1, 2, 2], &[0.9, 0.3, 0.2], 3).unwrap();
        let with_abstain =
            weighted_softmax_posterior(&[1, 2, 2, 0], &[0.9, 0.3, 0.2, 7.5], 3).unwrap();
        assert_eq!(base, with_abstain);
    }

    #[test]
    fn non_finite_weights_rejected() {
        assert!(weighted_softmax_posterior(&[1], &[f64::NAN], 2).is_err());
    }

    fn votes_strategy() -> impl Strategy<Value = (usize, Vec<u8>, Vec<f64>)> {
        (2usize..6, 1usize..10).prop_flat_map(|(c, m)| {
            (
                Just(c),
                proptest::collection::vec(0..=c as u8, m),
                proptest::collection::vec(0.0f64..3.0, m),
            )
        })
    }

    proptest! {
        #[test]
        fn shift_invariant_and_monotone((c, votes, weights) in votes_strategy(), bump in 0.01f64..2.0) {
            let p = weighted_softmax_posterior(&votes, &weights, c).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);

            // a vote-free extra LF of any weight adds nothing
            let mut v2 = votes.clone();
            v2.push(0);
            let mut w2 = weights.clone();
            w2.push(bump);
            prop_assert_eq!(&weighted_softmax_posterior(&v2, &w2, c).unwrap(), &p);

            // an extra LF voting for every class shifts all scores equally
            let mut v3 = votes.clone();
            let mut w3 = weights.clone();
            for k in 1..=c as u8 {
                v3.push(k);
                w3.push(bump);
            }
            let q = weighted_softmax_posterior(&v3, &w3, c).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }

            // raising the weight of a voting LF raises its class probability
            if let Some(j) = votes.iter().position(|&v| v != 0) {
                let k = votes[j] as usize - 1;
                if p[k] < 1.0 - 1e-12 {
                    let mut w4 = weights.clone();
                    w4[j] += bump;
                    let r = weighted_softmax_posterior(&votes, &w4, c).unwrap();
                    prop_assert!(r[k] > p[k]);
                }
            }
        }

        #[test]
        fn uniform_weights_agree_with_majority_vote((c, votes, _w) in votes_strategy(), w in 0.1f64..2.0) {
            let l = LabelMatrix::new(1, votes.len(), c, votes.clone()).unwrap();
            let mv = majority_vote(&l);
            let p = weighted_softmax_posterior(&votes, &vec![w; votes.len()], c).unwrap();
            if l.is_covered(0) {
                prop_assert_eq!(argmax(&p), mv.crisp()[0]);
            }
        }
    }
}
