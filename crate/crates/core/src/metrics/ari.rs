use std::collections::HashMap;

use crate::error::{Error, Result};

fn choose2(k: usize) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// Adjusted Rand Index between two flat clusterings, from the contingency
/// table with the usual expected-index correction. Labels are arbitrary
/// identifiers; only the induced partitions matter.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("ARI inputs differ in length"));
    }
    if a.len() < 2 {
        return Err(Error::invalid("ARI needs at least two samples"));
    }
    let mut cells: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&k| choose2(k)).sum();
    let sum_a: f64 = rows.values().map(|&k| choose2(k)).sum();
    let sum_b: f64 = cols.values().map(|&k| choose2(k)).sum();
    let expected = sum_a * sum_b / choose2(a.len());
    let max = 0.5 * (sum_a + sum_b);
    let denom = max - expected;
    if denom == 0.0 {
        // both partitions are trivial in the same way
        return Ok(1.0);
    }
    Ok((index - expected) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_permuted() {
        let a = vec![0, 0, 1, 1, 2, 2, 2];
        assert!((adjusted_rand_index(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b: Vec<usize> = a.iter().map(|&x| [5, 9, 1][x]).collect();
        assert!((adjusted_rand_index(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_cluster_against_split_is_zero() {
        // contingency by hand: index = 2·C(3,2) = 6, sum_a = C(6,2) = 15,
        // sum_b = 6, expected = 15·6/15 = 6 → numerator 0
        let a = vec![0; 6];
        let b = vec![0, 0, 0, 1, 1, 1];
        assert_eq!(adjusted_rand_index(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn known_value() {
        let a = vec![0, 0, 1, 1, 1];
        let b = vec![0, 0, 1, 1, 0];
        // cells: (0,0)=2, (1,1)=2, (1,0)=1 → index 2
        // rows: 2,3 → 1+3 = 4; cols: 3,2 → 3+1 = 4; expected = 16/10 = 1.6
        // max = 4 → ARI = 0.4 / 2.4
        let v = adjusted_rand_index(&a, &b).unwrap();
        assert!((v - 0.4 / 2.4).abs() < 1e-12);
    }

    #[test]
    fn length_checks() {
        assert!(adjusted_rand_index(&[0], &[0]).is_err());
        assert!(adjusted_rand_index(&[0, 1], &[0]).is_err());
    }
}
