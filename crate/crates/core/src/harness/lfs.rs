use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::nearest_prototype;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};
use crate::weaksup::{LabelMatrix, LfSpec};
use crate::wsgan::LfApplicator;

/// Ranges for randomly drawn unipolar LFs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfSpecRanges {
    pub count: usize,
    pub accuracy: (f64, f64),
    pub propensity: (f64, f64),
}

impl Default for LfSpecRanges {
    fn default() -> Self {
        Self {
            count: 12,
            accuracy: (0.55, 0.9),
            propensity: (0.1, 0.3),
        }
    }
}

/// Share of a target class an LF may claim as true positives.
pub const FEASIBILITY_MARGIN: f64 = 0.9;

/// Target classes cycle through `0..C`; accuracy and propensity are drawn
/// uniformly and redrawn while `accuracy · propensity` would need more
/// true positives than `FEASIBILITY_MARGIN / C` of the samples.
pub fn random_lf_specs(classes: usize, ranges: &LfSpecRanges, seed: u64) -> Result<Vec<LfSpec>> {
    let (alo, ahi) = ranges.accuracy;
    let (plo, phi) = ranges.propensity;
    if !(alo <= ahi && alo > 1.0 / classes as f64 && ahi <= 1.0) {
        return Err(Error::invalid(format!(
            "accuracy range {:?} must sit inside (1/C, 1]",
            ranges.accuracy
        )));
    }
    if !(plo <= phi && plo > 0.0 && phi <= 1.0) {
        return Err(Error::invalid(format!(
            "propensity range {:?} must sit inside (0, 1]",
            ranges.propensity
        )));
    }
    let cap = FEASIBILITY_MARGIN / classes as f64;
    if alo * plo > cap {
        return Err(Error::Infeasible(format!(
            "even the smallest accuracy × propensity {} exceeds {cap}",
            alo * plo
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };
    let mut specs = Vec::with_capacity(ranges.count);
    for j in 0..ranges.count {
        let (a, p) = loop {
            let a = draw(&mut rng, alo, ahi);
            let p = draw(&mut rng, plo, phi);
            if a * p <= cap {
                break (a, p);
            }
        };
        specs.push(LfSpec {
            target_class: j % classes,
            target_accuracy: a,
            target_propensity: p,
            seed: rng.random(),
        });
    }
    Ok(specs)
}

/// Applies the synthetic LFs to new points: each point takes the class of
/// its nearest prototype, then LF `j` votes with probability
/// `p a / π` if that class is its target and `p (1 - a) / (1 - π)`
/// otherwise, where `π` is the target class's prior. Over points drawn
/// from the mixture this reproduces the LF's propensity and accuracy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrototypeApplicator {
    pub prototypes: Tensor,
    pub specs: Vec<LfSpec>,
    pub priors: Vec<f64>,
}

impl PrototypeApplicator {
    pub fn new(prototypes: Tensor, specs: Vec<LfSpec>, priors: Vec<f64>) -> Result<Self> {
        if priors.len() != prototypes.rows() {
            return Err(Error::invalid("one prior per prototype"));
        }
        for s in &specs {
            s.validate(priors.len())?;
            let pi = priors[s.target_class];
            if !(pi > 0.0 && pi < 1.0) {
                return Err(Error::invalid(format!(
                    "prior of class {} must lie in (0, 1)",
                    s.target_class
                )));
            }
        }
        Ok(Self {
            prototypes,
            specs,
            priors,
        })
    }

    /// Vote probabilities `(on target class, elsewhere)` for LF `j`.
    pub fn vote_rates(&self, j: usize) -> (f64, f64) {
        let s = &self.specs[j];
        let pi = self.priors[s.target_class];
        let hit = (s.target_propensity * s.target_accuracy / pi).min(1.0);
        let miss = (s.target_propensity * (1.0 - s.target_accuracy) / (1.0 - pi)).min(1.0);
        (hit, miss)
    }
}

impl LfApplicator for PrototypeApplicator {
    fn apply(&self, x: &Tensor, rng: &mut ChaCha8Rng) -> Result<LabelMatrix> {
        if x.cols() != self.prototypes.cols() {
            return Err(Error::invalid("points and prototypes differ in dimension"));
        }
        let m = self.specs.len();
        let rates: Vec<(f64, f64)> = (0..m).map(|j| self.vote_rates(j)).collect();
        let mut votes = vec![0u8; x.rows() * m];
        for i in 0..x.rows() {
            let t = nearest_prototype(&self.prototypes, x.row_slice(i));
            for (j, s) in self.specs.iter().enumerate() {
                let p = if t == s.target_class {
                    rates[j].0
                } else {
                    rates[j].1
                };
                if rng.random::<f64>() < p {
                    votes[i * m + j] = s.target_class as u8 + 1;
                }
            }
        }
        LabelMatrix::new(x.rows(), m, self.priors.len(), votes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::dataset::{synth_dataset, DatasetSpec};
    use crate::weaksup::lf_stats;

    #[test]
    fn default_ranges_are_feasible_at_four_classes() {
        let specs = random_lf_specs(4, &LfSpecRanges::default(), 3).unwrap();
        assert_eq!(specs.len(), 12);
        for (j, s) in specs.iter().enumerate() {
            assert_eq!(s.target_class, j % 4);
            assert!(s.target_accuracy * s.target_propensity <= 0.9 / 4.0);
            assert!((0.55..0.9).contains(&s.target_accuracy));
        }
        assert_eq!(
            specs,
            random_lf_specs(4, &LfSpecRanges::default(), 3).unwrap()
        );
    }

    #[test]
    fn impossible_ranges_rejected() {
        let r = LfSpecRanges {
            count: 3,
            accuracy: (0.95, 1.0),
            propensity: (0.5, 0.6),
        };
        assert!(matches!(
            random_lf_specs(4, &r, 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn applicator_reproduces_rates_on_mixture_samples() {
        let spec = DatasetSpec {
            radius: 6.0,
            sigma: 0.3,
            n: 20_000,
            ..Default::default()
        };
        let d = synth_dataset(&spec).unwrap();
        let lfs = random_lf_specs(4, &LfSpecRanges::default(), 1).unwrap();
        let app = PrototypeApplicator::new(spec.prototypes(), lfs.clone(), vec![0.25; 4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = app.apply(&d.features, &mut rng).unwrap();
        let stats = lf_stats(&l, &d.labels).unwrap();
        for (s, st) in lfs.iter().zip(&stats.per_lf) {
            assert!(
                (st.coverage - s.target_propensity).abs() < 0.02,
                "{st:?} vs {s:?}"
            );
            assert!(
                (st.accuracy.unwrap() - s.target_accuracy).abs() < 0.04,
                "{st:?} vs {s:?}"
            );
        }
    }
}
