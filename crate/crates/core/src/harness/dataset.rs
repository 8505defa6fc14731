use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::diffcore::Tensor;
use crate::error::{Error, Result};

/// Gaussian mixture with class means spaced evenly on a circle in the
/// first two coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub classes: usize,
    pub dim: usize,
    pub n: usize,
    pub radius: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            classes: 4,
            dim: 2,
            n: 4000,
            radius: 4.0,
            sigma: 0.6,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        if self.classes > 255 {
            return Err(Error::invalid("at most 255 classes fit a vote byte"));
        }
        if self.dim < 2 {
            return Err(Error::invalid(
                "prototypes live on a circle, so dim must be at least 2",
            ));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma must be positive"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::invalid(
                "radius must be positive so prototypes are distinct",
            ));
        }
        Ok(())
    }

    /// `C × d` class means.
    pub fn prototypes(&self) -> Tensor {
        let mut t = Tensor::zeros(self.classes, self.dim);
        for k in 0..self.classes {
            let angle = std::f64::consts::TAU * k as f64 / self.classes as f64;
            t.set(k, 0, self.radius * angle.cos());
            t.set(k, 1, self.radius * angle.sin());
        }
        t
    }
}

/// Labels uniform over classes, then `x = μ_y + σ ε`.
pub fn synth_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let protos = spec.prototypes();
    let labels: Vec<usize> = (0..spec.n)
        .map(|_| rng.random_range(0..spec.classes))
        .collect();
    let mut data = Vec::with_capacity(spec.n * spec.dim);
    for &y in &labels {
        for j in 0..spec.dim {
            let e: f64 = StandardNormal.sample(&mut rng);
            data.push(protos.get(y, j) + spec.sigma * e);
        }
    }
    Dataset::new(Tensor::matrix(spec.n, spec.dim, data), labels, spec.classes)
}

/// Index of the closest prototype row; ties go to the lower index.
pub fn nearest_prototype(prototypes: &Tensor, x: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for k in 0..prototypes.rows() {
        let d: f64 = prototypes
            .row_slice(k)
            .iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

pub fn nearest_prototype_labels(prototypes: &Tensor, x: &Tensor) -> Vec<usize> {
    (0..x.rows())
        .map(|i| nearest_prototype(prototypes, x.row_slice(i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::accuracy;

    #[test]
    fn tiny_sigma_sits_on_prototypes() {
        let spec = DatasetSpec {
            sigma: 1e-9,
            n: 200,
            ..Default::default()
        };
        let d = synth_dataset(&spec).unwrap();
        let pred = nearest_prototype_labels(&spec.prototypes(), &d.features);
        assert_eq!(accuracy(&pred, &d.labels).unwrap(), 1.0);
    }

    #[test]
    fn separated_mixture_is_nearly_bayes_separable() {
        let spec = DatasetSpec {
            radius: 4.0,
            sigma: 0.6,
            n: 4000,
            ..Default::default()
        };
        let d = synth_dataset(&spec).unwrap();
        let pred = nearest_prototype_labels(&spec.prototypes(), &d.features);
        assert!(accuracy(&pred, &d.labels).unwrap() >= 0.99);
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = DatasetSpec::default();
        assert_eq!(synth_dataset(&spec).unwrap(), synth_dataset(&spec).unwrap());
        let bad = DatasetSpec {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(synth_dataset(&bad).is_err());
        let one = DatasetSpec {
            classes: 1,
            ..Default::default()
        };
        assert!(one.validate().is_err());
    }
}
