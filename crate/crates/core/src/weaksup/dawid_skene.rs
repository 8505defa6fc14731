use log::warn;
use serde::{Deserialize, Serialize};

use super::matrix::{LabelMatrix, PosteriorTable};
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

pub const ACCURACY_CLAMP: (f64, f64) = (1e-4, 1.0 - 1e-4);
const INITIAL_ACCURACY: f64 = 0.7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DawidSkeneOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Re-estimate class priors in the M-step; otherwise they stay uniform.
    pub update_priors: bool,
}

impl Default for DawidSkeneOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            tol: 1e-6,
            update_priors: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DawidSkeneFit {
    pub accuracies: Vec<f64>,
    pub priors: Vec<f64>,
    pub posteriors: PosteriorTable,
    /// Marginal log-likelihood after each E-step.
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Marginal log-likelihood of the covered rows under a one-coin model.
/// Kept separate from the EM loop so it can be recomputed independently.
pub fn one_coin_log_likelihood(l: &LabelMatrix, accuracies: &[f64], priors: &[f64]) -> f64 {
    let c = l.classes();
    let mut buf = vec![0.0; c];
    (0..l.n())
        .filter(|&i| l.is_covered(i))
        .map(|i| {
            row_log_joint(l.row(i), accuracies, priors, &mut buf);
            log_sum_exp(&buf)
        })
        .sum()
}

fn row_log_joint(row: &[u8], acc: &[f64], priors: &[f64], out: &mut [f64]) {
    let c = priors.len();
    for (k, o) in out.iter_mut().enumerate() {
        *o = priors[k].ln();
    }
    for (&v, &a) in row.iter().zip(acc) {
        if v == 0 {
            continue;
        }
        let hit = a.ln();
        let miss = ((1.0 - a) / (c - 1) as f64).ln();
        for (k, o) in out.iter_mut().enumerate() {
            *o += if v as usize == k + 1 { hit } else { miss };
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// One-coin Dawid-Skene EM: every source has a single accuracy `a_j` and
/// spreads its errors uniformly over the other `C - 1` classes.
pub fn dawid_skene_fit(l: &LabelMatrix, opts: &DawidSkeneOptions) -> Result<DawidSkeneFit> {
    if opts.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tol must be positive"));
    }
    let (n, m, c) = (l.n(), l.m(), l.classes());
    let covered: Vec<usize> = (0..n).filter(|&i| l.is_covered(i)).collect();
    let mut acc = vec![INITIAL_ACCURACY; m];
    let mut priors = vec![1.0 / c as f64; c];
    let mut post = vec![1.0 / c as f64; n * c];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut buf = vec![0.0; c];

    for _ in 0..opts.max_iters {
        iterations += 1;
        // E-step
        let mut ll = 0.0;
        for &i in &covered {
            row_log_joint(l.row(i), &acc, &priors, &mut buf);
            let lse = log_sum_exp(&buf);
            ll += lse;
            for k in 0..c {
                post[i * c + k] = (buf[k] - lse).exp();
            }
        }
        let prev = trace.last().copied();
        trace.push(ll);
        if let Some(prev) = prev {
            if (ll - prev).abs() < opts.tol {
                converged = true;
                break;
            }
        }

        // M-step
        for (j, a) in acc.iter_mut().enumerate() {
            let (mut agree, mut total) = (0.0, 0usize);
            for &i in &covered {
                let v = l.get(i, j);
                if v != 0 {
                    agree += post[i * c + v as usize - 1];
                    total += 1;
                }
            }
            if total > 0 {
                *a = (agree / total as f64).clamp(ACCURACY_CLAMP.0, ACCURACY_CLAMP.1);
            }
        }
        if opts.update_priors && !covered.is_empty() {
            for (k, p) in priors.iter_mut().enumerate() {
                *p = covered.iter().map(|&i| post[i * c + k]).sum::<f64>() / covered.len() as f64;
            }
        }
    }

    if !converged {
        warn!(
            "Dawid-Skene did not converge within {} iterations",
            opts.max_iters
        );
    }
    let posteriors = PosteriorTable::new(
        Tensor::matrix(n, c, post),
        (0..n).map(|i| l.is_covered(i)).collect(),
    )?;
    Ok(DawidSkeneFit {
        accuracies: acc,
        priors,
        posteriors,
        log_likelihood: trace,
        iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_identical_perfect_columns() {
        // 6-row instance; by hand: agreement of a_j with crisp posteriors is
        // 1 after the first M-step, so the accuracies run into the clamp.
        let rows = vec![
            vec![1, 1],
            vec![2, 2],
            vec![3, 3],
            vec![1, 1],
            vec![2, 2],
            vec![3, 3],
        ];
        let l = LabelMatrix::from_rows(&rows, 3).unwrap();
        let fit = dawid_skene_fit(&l, &DawidSkeneOptions::default()).unwrap();
        for a in &fit.accuracies {
            assert!((a - ACCURACY_CLAMP.1).abs() < 1e-12, "{a}");
        }
        for (i, row) in rows.iter().enumerate() {
            let p = fit.posteriors.row(i);
            assert!(p[row[0] as usize - 1] > 0.999);
        }
    }

    #[test]
    fn single_column_with_fixed_prior() {
        let rows = vec![vec![2], vec![0], vec![1], vec![3], vec![2]];
        let l = LabelMatrix::from_rows(&rows, 3).unwrap();
        let opts = DawidSkeneOptions {
            update_priors: false,
            ..Default::default()
        };
        let fit = dawid_skene_fit(&l, &opts).unwrap();
        let crisp = fit.posteriors.crisp();
        for (i, r) in rows.iter().enumerate() {
            if r[0] != 0 {
                assert_eq!(crisp[i], r[0] as usize - 1);
            }
        }
        assert!(!fit.posteriors.covered()[1]);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let votes: Vec<u8> = (0..500).map(|_| rng.random_range(0..=3u8)).collect();
        let l = LabelMatrix::new(100, 5, 3, votes).unwrap();
        let fit = dawid_skene_fit(&l, &DawidSkeneOptions::default()).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn independent_likelihood_matches_trace_at_end() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let votes: Vec<u8> = (0..300).map(|_| rng.random_range(0..=2u8)).collect();
        let l = LabelMatrix::new(60, 5, 2, votes).unwrap();
        let opts = DawidSkeneOptions {
            max_iters: 1,
            ..Default::default()
        };
        let fit = dawid_skene_fit(&l, &opts).unwrap();
        let direct = one_coin_log_likelihood(&l, &[0.7; 5], &[0.5, 0.5]);
        assert!((fit.log_likelihood[0] - direct).abs() < 1e-9);
        assert!(!fit.converged);
    }

    #[test]
    fn rejects_bad_options() {
        let l = LabelMatrix::new(1, 1, 2, vec![1]).unwrap();
        let o = DawidSkeneOptions {
            max_iters: 0,
            ..Default::default()
        };
        assert!(dawid_skene_fit(&l, &o).is_err());
    }
}
