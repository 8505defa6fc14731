use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::channel::{hellinger_squared, tv_distance, FiniteJoint};
use crate::error::Result;

pub const INEQUALITY_TOLERANCE: f64 = 1e-12;

/// One inequality between Hellinger and total variation, evaluated on
/// `(D, TV)` with `D = Σ(√p - √q)²`.
#[derive(Clone, Copy, Debug)]
struct Inequality {
    name: &'static str,
    reading: &'static str,
    /// Returns `(lhs, rhs)` of `lhs ≤ rhs`.
    sides: fn(f64, f64) -> (f64, f64),
}

const INEQUALITIES: [Inequality; 6] = [
    Inequality {
        name: "D <= sqrt(2 TV)",
        reading: "squared",
        sides: |d, tv| (d, (2.0 * tv).sqrt()),
    },
    Inequality {
        name: "TV <= sqrt(D) sqrt(1 - D/4)",
        reading: "squared",
        sides: |d, tv| (tv, d.sqrt() * (1.0 - d / 4.0).max(0.0).sqrt()),
    },
    Inequality {
        name: "H <= sqrt(2 TV)",
        reading: "unsquared",
        sides: |d, tv| (d.sqrt(), (2.0 * tv).sqrt()),
    },
    Inequality {
        name: "TV <= H sqrt(1 - H^2/4)",
        reading: "unsquared",
        sides: |d, tv| (tv, d.sqrt() * (1.0 - d / 4.0).max(0.0).sqrt()),
    },
    Inequality {
        name: "D <= sqrt(2 TV)",
        reading: "mixed",
        sides: |d, tv| (d, (2.0 * tv).sqrt()),
    },
    Inequality {
        name: "TV <= D sqrt(1 - D^2/4)",
        reading: "mixed",
        sides: |d, tv| (tv, d * (1.0 - d * d / 4.0).max(0.0).sqrt()),
    },
];

/// The squared convention made consistent: `D ≤ 2 TV` (that is,
/// `sqrt(D) ≤ sqrt(2 TV)`) and `TV ≤ sqrt(D) sqrt(1 - D/4)`.
fn chain_sides(d: f64, tv: f64) -> [(f64, f64); 2] {
    [
        (d, 2.0 * tv),
        (tv, d.sqrt() * (1.0 - d / 4.0).max(0.0).sqrt()),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityResult {
    pub inequality: String,
    /// `squared` uses D as is, `unsquared` uses `H = sqrt(D)`, `mixed`
    /// substitutes D into the unsquared forms.
    pub reading: String,
    pub violations: usize,
    /// Largest `lhs - rhs` seen; positive means violated.
    pub max_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HellingerSummary {
    pub pairs: usize,
    pub inequalities: Vec<InequalityResult>,
    /// Readings whose every inequality held on all pairs.
    pub universal_readings: Vec<String>,
    pub chain_violations: usize,
}

/// Evaluates every reading on `pairs` random pairs plus two fixed
/// boundary pairs (disjoint supports, point mass against a spread).
pub fn hellinger_tv_study(pairs: usize, max_support: usize, seed: u64) -> Result<HellingerSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<(FiniteJoint, FiniteJoint)> = Vec::with_capacity(pairs + 2);
    if pairs > 0 {
        all.push((
            FiniteJoint::new(vec![[1.0, 0.0], [0.0, 0.0]])?,
            FiniteJoint::new(vec![[0.0, 0.0], [0.0, 1.0]])?,
        ));
        all.push((
            FiniteJoint::new(vec![[1.0, 0.0], [0.0, 0.0]])?,
            FiniteJoint::new(vec![[0.1, 0.45], [0.45, 0.0]])?,
        ));
    }
    for _ in 0..pairs {
        let s = rng.random_range(1..=max_support.max(1));
        all.push((
            FiniteJoint::random(s, &mut rng),
            FiniteJoint::random(s, &mut rng),
        ));
    }
    let mut results: Vec<InequalityResult> = INEQUALITIES
        .iter()
        .map(|q| InequalityResult {
            inequality: q.name.to_string(),
            reading: q.reading.to_string(),
            violations: 0,
            max_excess: f64::NEG_INFINITY,
        })
        .collect();
    let mut chain_violations = 0;
    for (p, q) in &all {
        let d = hellinger_squared(p, q)?;
        let tv = tv_distance(p, q)?;
        for (ineq, r) in INEQUALITIES.iter().zip(results.iter_mut()) {
            let (lhs, rhs) = (ineq.sides)(d, tv);
            let excess = lhs - rhs;
            r.max_excess = r.max_excess.max(excess);
            if excess > INEQUALITY_TOLERANCE {
                r.violations += 1;
            }
        }
        if chain_sides(d, tv)
            .iter()
            .any(|(l, r)| l - r > INEQUALITY_TOLERANCE)
        {
            chain_violations += 1;
        }
    }
    let mut universal_readings = Vec::new();
    for reading in ["squared", "unsquared", "mixed"] {
        if !all.is_empty()
            && results
                .iter()
                .filter(|r| r.reading == reading)
                .all(|r| r.violations == 0)
        {
            universal_readings.push(reading.to_string());
        }
    }
    Ok(HellingerSummary {
        pairs: all.len(),
        inequalities: results,
        universal_readings,
        chain_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_pair_separates_readings() {
        // D = 2(1 - √0.1), TV = 0.9
        let d: f64 = 2.0 * (1.0 - 0.1f64.sqrt());
        let tv: f64 = 0.9;
        assert!(d > (2.0 * tv).sqrt());
        assert!(d.sqrt() <= (2.0 * tv).sqrt());
        let s = hellinger_tv_study(0, 4, 0).unwrap();
        assert_eq!(s.pairs, 0);
        let s = hellinger_tv_study(1, 4, 0).unwrap();
        let first = &s.inequalities[0];
        assert!(first.violations >= 1);
        assert!(first.max_excess >= d - (2.0 * tv).sqrt() - 1e-12);
    }

    #[test]
    fn unsquared_reading_and_chain_hold() {
        let s = hellinger_tv_study(300, 16, 1).unwrap();
        assert_eq!(s.chain_violations, 0);
        assert!(s.universal_readings.contains(&"unsquared".to_string()));
        assert!(!s.universal_readings.contains(&"squared".to_string()));
    }
}
